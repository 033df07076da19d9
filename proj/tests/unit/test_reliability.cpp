#include <array>
#include <random>
#include <sstream>

#include "gtest/gtest.h"

#include "seqlab/reliability.hpp"

using namespace seqlab;

namespace {

// Presence vectors for `code`; absence is coded as R so every turn has a code.
std::vector<DualAnnotation> from_presence(const std::vector<int>& a, const std::vector<int>& b, DACode code) {
    std::vector<DualAnnotation> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        DualAnnotation d{"S", i, SpeakerRole::Chatbot, {}, {}};
        d.coder_a.push_back(a[i] ? code : DACode::R);
        d.coder_b.push_back(b[i] ? code : DACode::R);
        out.push_back(d);
    }
    return out;
}

// Kappa straight from the 2x2 table.
double hand_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        (a[i] ? (b[i] ? n11 : n10) : (b[i] ? n01 : n00)) += 1;
    }
    const double n = n11 + n10 + n01 + n00;
    const double po = (n11 + n00) / n;
    const double pe = ((n11 + n10) * (n11 + n01) + (n00 + n01) * (n00 + n10)) / (n * n);
    return (po - pe) / (1 - pe);
}

// Mean squares via residuals rather than sums of squares.
double hand_icc(const std::vector<std::array<double, 2>>& x) {
    const double n = static_cast<double>(x.size());
    double grand = 0, c0 = 0, c1 = 0;
    for (const auto& r : x) {
        c0 += r[0];
        c1 += r[1];
    }
    grand = (c0 + c1) / (2 * n);
    c0 /= n;
    c1 /= n;
    double msr = 0, mse = 0;
    for (const auto& r : x) {
        const double m = (r[0] + r[1]) / 2;
        msr += 2 * (m - grand) * (m - grand);
        const double e0 = r[0] - m - c0 + grand;
        const double e1 = r[1] - m - c1 + grand;
        mse += e0 * e0 + e1 * e1;
    }
    msr /= n - 1;
    mse /= n - 1;
    const double msc = n * ((c0 - grand) * (c0 - grand) + (c1 - grand) * (c1 - grand));
    return (msr - mse) / (msr + mse + 2 * (msc - mse) / n);
}

}  // namespace

TEST(Kappa, HandComputedFixture) {
    const std::vector<int> a = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    const std::vector<int> b = {1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
    const auto ann = from_presence(a, b, DACode::Cp);
    const auto k = kappa_per_code(ann, DACode::Cp);
    EXPECT_NEAR(k.observed_agreement, 0.8, 1e-12);
    EXPECT_NEAR(k.expected_agreement, 0.58, 1e-12);
    EXPECT_NEAR(k.kappa, 0.5238, 1e-4);
    EXPECT_NEAR(k.kappa, hand_kappa(a, b), 1e-12);
    EXPECT_EQ(k.n, 10u);
}

TEST(Kappa, IdenticalCodersGiveOne) {
    const std::vector<int> a = {1, 0, 1, 0, 0, 1};
    const auto k = kappa_per_code(from_presence(a, a, DACode::Q), DACode::Q);
    EXPECT_DOUBLE_EQ(k.kappa, 1.0);
    EXPECT_FALSE(k.degenerate);
}

TEST(Kappa, ChanceAgreementGivesZero) {
    const std::vector<int> a = {1, 1, 0, 0, 1, 1, 0, 0};
    const std::vector<int> b = {1, 0, 1, 0, 1, 0, 1, 0};
    EXPECT_NEAR(kappa_per_code(from_presence(a, b, DACode::A), DACode::A).kappa, 0.0, 1e-12);
}

TEST(Kappa, ConstantAgreementIsDegenerate) {
    const std::vector<int> zeros(5, 0);
    const auto k = kappa_per_code(from_presence(zeros, zeros, DACode::D), DACode::D);
    EXPECT_TRUE(k.degenerate);
    EXPECT_DOUBLE_EQ(k.kappa, 1.0);
}

TEST(Kappa, EmptyInputThrows) {
    EXPECT_THROW(kappa_per_code({}, DACode::Q), ReliabilityError);
}

TEST(Kappa, LowestKappaRankedFirst) {
    // D agrees at kappa 0.25 (16 turns: 5 both, 3 only a, 3 only b, 5 neither).
    std::vector<int> a, b;
    for (int i = 0; i < 5; ++i) a.push_back(1), b.push_back(1);
    for (int i = 0; i < 3; ++i) a.push_back(1), b.push_back(0);
    for (int i = 0; i < 3; ++i) a.push_back(0), b.push_back(1);
    for (int i = 0; i < 5; ++i) a.push_back(0), b.push_back(0);
    auto ann = from_presence(a, b, DACode::D);
    for (std::size_t i = 0; i < ann.size(); ++i) {
        if (i % 2 == 0) {
            ann[i].coder_a.push_back(DACode::Q);
            ann[i].coder_b.push_back(DACode::Q);
        }
    }
    const auto all = kappa_all(ann);
    ASSERT_EQ(all.size(), 3u);  // D, Q, R
    EXPECT_EQ(all.front().code, DACode::D);
    EXPECT_NEAR(all.front().kappa, 0.25, 1e-12);
    for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LE(all[i - 1].kappa, all[i].kappa);
}

TEST(Kappa, SingleCodeAndIdenticalAnnotations) {
    std::vector<DualAnnotation> ann;
    for (std::size_t i = 0; i < 4; ++i) ann.push_back({"S", i, std::nullopt, {DACode::R}, {DACode::R}});
    ann.push_back({"S", 4, std::nullopt, {}, {}});
    const auto all = kappa_all(ann);
    ASSERT_EQ(all.size(), 1u);
    EXPECT_DOUBLE_EQ(all[0].kappa, 1.0);
}

TEST(Kappa, PerLabelUsesOnlyThatRole) {
    std::vector<DualAnnotation> ann = {
        {"S", 0, SpeakerRole::Chatbot, {DACode::Q}, {DACode::Q}},
        {"S", 1, SpeakerRole::Student, {DACode::Q}, {DACode::R}},
        {"S", 2, SpeakerRole::Chatbot, {DACode::A}, {DACode::A}},
        {"S", 3, SpeakerRole::Student, {DACode::R}, {DACode::R}},
    };
    const auto t = kappa_per_label(ann, *parse_label("[t]Q"));
    EXPECT_EQ(t.n, 2u);
    EXPECT_DOUBLE_EQ(t.kappa, 1.0);
    EXPECT_EQ(t.label(), "[t]Q");
    const auto s = kappa_per_label(ann, *parse_label("[s]Q"));
    EXPECT_EQ(s.n, 2u);
    EXPECT_NEAR(s.kappa, 0.0, 1e-12);
    ann.push_back({"S", 4, std::nullopt, {DACode::Q}, {DACode::Q}});
    EXPECT_THROW(kappa_per_label(ann, *parse_label("[t]Q")), ReliabilityError);
}

TEST(KappaProperty, SwapAndComplementInvariance) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
        std::vector<int> a(n), b(n);
        for (auto& x : a) x = static_cast<int>(rng() % 2);
        for (auto& x : b) x = static_cast<int>(rng() % 2);
        std::vector<int> na(n), nb(n);
        for (std::size_t i = 0; i < n; ++i) na[i] = 1 - a[i], nb[i] = 1 - b[i];

        const auto k = kappa_per_code(from_presence(a, b, DACode::M), DACode::M);
        const auto swapped = kappa_per_code(from_presence(b, a, DACode::M), DACode::M);
        const auto flipped = kappa_per_code(from_presence(na, nb, DACode::M), DACode::M);
        EXPECT_NEAR(k.kappa, swapped.kappa, 1e-12);
        EXPECT_NEAR(k.kappa, flipped.kappa, 1e-12);
        EXPECT_LE(k.kappa, 1.0 + 1e-12);
        if (!k.degenerate) EXPECT_NEAR(k.kappa, hand_kappa(a, b), 1e-12);
    }
}

TEST(KappaProperty, SwapLeavesAllResultsUnchanged) {
    std::mt19937_64 rng(5);
    std::vector<DualAnnotation> ann;
    for (std::size_t i = 0; i < 300; ++i) {
        DualAnnotation d{"S", i, std::nullopt, {}, {}};
        d.coder_a.push_back(kAllCodes[rng() % kNumCodes]);
        d.coder_b.push_back(rng() % 4 ? d.coder_a[0] : kAllCodes[rng() % kNumCodes]);
        ann.push_back(d);
    }
    auto swapped = ann;
    for (auto& d : swapped) std::swap(d.coder_a, d.coder_b);
    const auto x = kappa_all(ann), y = kappa_all(swapped);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(x[i].code, y[i].code);
        EXPECT_NEAR(x[i].kappa, y[i].kappa, 1e-12);
    }
}

TEST(Annotations, ParseJsonLines) {
    std::istringstream in(R"({"session_id":"s1","turn":0,"speaker":"chatbot","a":["Q","A"],"b":["Q"]}
{"session_id":"s1","turn":1,"a":[],"b":["R"]}
)");
    const auto ann = parse_annotations(in);
    ASSERT_EQ(ann.size(), 2u);
    EXPECT_EQ(ann[0].coder_a.size(), 2u);
    EXPECT_EQ(ann[0].speaker, SpeakerRole::Chatbot);
    EXPECT_FALSE(ann[1].speaker);
    std::istringstream bad(R"({"session_id":"s1","turn":0,"a":["X"],"b":[]})");
    EXPECT_THROW(parse_annotations(bad), ReliabilityError);
}

TEST(Icc, IdenticalRatersGiveOne) {
    const std::vector<std::array<double, 2>> x = {{1, 1}, {2, 2}, {4, 4}, {7, 7}};
    EXPECT_NEAR(icc_two_way(x).icc, 1.0, 1e-12);
}

TEST(Icc, MirroredRatersAreNegative) {
    const std::vector<std::array<double, 2>> x = {{1, -1}, {2, -2}, {3, -3}};
    const auto r = icc_two_way(x);
    EXPECT_LT(r.icc, 0.0);
    // subject means are all zero: MSR = 0, MSE = 2, MSC = 3 * (4 + 4) = 24
    EXPECT_NEAR(r.ms_subjects, 0.0, 1e-12);
    EXPECT_NEAR(r.ms_error, 2.0, 1e-12);
    EXPECT_NEAR(r.ms_raters, 24.0, 1e-12);
    EXPECT_NEAR(r.icc, -2.0 / (0.0 + 2.0 + 2.0 * (24.0 - 2.0) / 3.0), 1e-12);
}

TEST(Icc, FourSubjectFixture) {
    const std::vector<std::array<double, 2>> x = {{9, 8}, {6, 7}, {8, 9}, {4, 3}};
    // grand 6.75; subject means 8.5, 6.5, 8.5, 3.5 -> MSR = 2*(3.0625+0.0625+3.0625+10.5625)/3
    const auto r = icc_two_way(x);
    EXPECT_NEAR(r.ms_subjects, 2.0 * 16.75 / 3.0, 1e-9);
    EXPECT_NEAR(r.ms_raters, 0.0, 1e-9);
    // residuals are +-0.5 in every cell -> SSE = 2, MSE = 2/3
    EXPECT_NEAR(r.ms_error, 2.0 / 3.0, 1e-9);
    // MSC = 0, so the rater term is 2 * (0 - 2/3) / 4
    EXPECT_NEAR(r.icc, 10.5 / 11.5, 1e-9);
    EXPECT_NEAR(r.icc, hand_icc(x), 1e-9);
    EXPECT_EQ(r.n_subjects, 4u);
}

TEST(Icc, DegenerateAndErrors) {
    const std::vector<std::array<double, 2>> flat = {{3, 3}, {3, 3}};
    const auto r = icc_two_way(flat);
    EXPECT_TRUE(r.degenerate);
    EXPECT_DOUBLE_EQ(r.icc, 1.0);
    const std::vector<std::array<double, 2>> one = {{1, 2}};
    EXPECT_THROW(icc_two_way(one), ReliabilityError);
}

TEST(IccProperty, ShiftAndScaleInvariance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 30)(rng);
        std::vector<std::array<double, 2>> x(n), shifted(n);
        const double shift = noise(rng) * 50.0;
        const double scale = 0.5 + std::abs(noise(rng)) * 3.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double truth = noise(rng) * 2.0;
            x[i] = {truth + noise(rng), truth + noise(rng)};
            shifted[i] = {x[i][0] * scale + shift, x[i][1] * scale + shift};
        }
        const double a = icc_two_way(x).icc;
        EXPECT_NEAR(a, icc_two_way(shifted).icc, 1e-9);
        EXPECT_NEAR(a, hand_icc(x), 1e-9);
        EXPECT_LE(a, 1.0 + 1e-12);
    }
}

TEST(Icc, ParseCsv) {
    std::istringstream in("subject,rater_a,rater_b\n1,3.5,4\n2,2,2.5\n");
    const auto x = parse_icc_csv(in);
    ASSERT_EQ(x.size(), 2u);
    EXPECT_DOUBLE_EQ(x[0][1], 4.0);
    std::istringstream bad("subject,rater_a,rater_b\n1,abc,4\n");
    EXPECT_THROW(parse_icc_csv(bad), ReliabilityError);
}
