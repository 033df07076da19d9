#include <algorithm>
#include <random>
#include <sstream>

#include "gtest/gtest.h"

#include "seqlab/seqmine.hpp"
#include "testkit.hpp"

using namespace seqlab;

namespace {

SequenceDatabase db_of(const std::vector<std::vector<std::string>>& rows) {
    return make_database(rows);
}

std::vector<Symbol> enc(const SequenceDatabase& db, std::vector<std::string> labels) {
    return *db.encode(labels);
}

std::size_t count_support(const SequenceDatabase& db, const std::vector<std::string>& labels, std::size_t delta) {
    const auto e = db.encode(labels);
    if (!e) return 0;
    std::size_t n = 0;
    for (const auto& s : db.sequences) n += occurs(s, *e, delta) ? 1 : 0;
    return n;
}

}  // namespace

TEST(Occurs, TrigramAdjacent) {
    const auto db = db_of({{"[t]Q", "[s]R", "[t]Cp"}});
    EXPECT_TRUE(occurs(db.sequences[0], enc(db, {"[t]Q", "[s]R", "[t]Cp"}), 1));
}

TEST(Occurs, GapBoundary) {
    const auto db = db_of({{"[t]Q", "[t]A", "[s]R"}});
    const auto p = enc(db, {"[t]Q", "[s]R"});
    EXPECT_FALSE(occurs(db.sequences[0], p, 1));
    EXPECT_TRUE(occurs(db.sequences[0], p, 2));
}

TEST(Occurs, SingleLabelAndEmpty) {
    const auto db = db_of({{"a", "b", "c", "d"}});
    for (const char* l : {"a", "b", "c", "d"}) EXPECT_TRUE(occurs(db.sequences[0], enc(db, {l}), 1));
    EXPECT_TRUE(occurs(db.sequences[0], std::vector<Symbol>{}, 1));
    EXPECT_FALSE(occurs(std::vector<Symbol>{}, enc(db, {"a"}), 1));
}

TEST(Occurs, LaterStartRescuesMatch) {
    // first "a" cannot reach "b" within the gap, second can
    const auto db = db_of({{"a", "x", "x", "a", "b"}});
    EXPECT_TRUE(occurs(db.sequences[0], enc(db, {"a", "b"}), 1));
    EXPECT_FALSE(occurs(db.sequences[0], enc(db, {"b", "a"}), 3));
}

TEST(Occurs, EventStreamOverload) {
    EventStream s{"S", {*parse_label("[t]Q"), *parse_label("[t]A"), *parse_label("[s]R")}};
    const std::vector<DALabel> p = {*parse_label("[t]Q"), *parse_label("[s]R")};
    EXPECT_FALSE(occurs(s, p, 1));
    EXPECT_TRUE(occurs(s, p, 1, GapMode::Intervening));
    EXPECT_TRUE(occurs(s, p, 2));
}

TEST(MinSupportTest, Resolution) {
    EXPECT_EQ(MinSupport::fraction(0.20).resolve(70), 14u);
    EXPECT_EQ(MinSupport::fraction(0.20).resolve(72), 15u);
    EXPECT_EQ(MinSupport::fraction(0.5).resolve(3), 2u);
    EXPECT_EQ(MinSupport::fraction(0.01).resolve(10), 1u);
    EXPECT_EQ(MinSupport::absolute(14).resolve(70), 14u);
    EXPECT_THROW(MinSupport::fraction(0.0), MiningError);
    EXPECT_THROW(MinSupport::fraction(1.5), MiningError);
    EXPECT_THROW(MinSupport::absolute(0), MiningError);
}

TEST(Params, Validation) {
    MiningParams p;
    EXPECT_NO_THROW(p.validate());
    p.max_len = 1;
    EXPECT_THROW(p.validate(), MiningError);
    p = {};
    p.max_gap = 0;
    EXPECT_THROW(p.validate(), MiningError);
    p = {};
    p.min_len = 0;
    EXPECT_THROW(p.validate(), MiningError);
}

TEST(Mine, SharedAdjacentPair) {
    const auto db = db_of({{"[t]Q", "[s]R", "[t]A"}, {"[t]A", "[t]Q", "[s]R"}, {"[t]Q", "[s]R"}});
    MiningParams p;
    p.min_support = MinSupport::absolute(2);
    const auto patterns = mine(db, p);
    ASSERT_FALSE(patterns.empty());
    EXPECT_EQ(patterns.front().labels, (std::vector<std::string>{"[t]Q", "[s]R"}));
    EXPECT_EQ(patterns.front().support_total, 3u);
    EXPECT_FALSE(patterns.front().grouped());
    EXPECT_THROW(patterns.front().support_diff(), MiningError);
}

TEST(Mine, OracleSmallCases) {
    const auto db = db_of({{"a", "b"}});
    MiningParams p;
    p.min_support = MinSupport::absolute(1);
    const auto brute = brute_force_mine(db, p);
    ASSERT_EQ(brute.size(), 1u);
    EXPECT_EQ(brute[0].labels, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(mine(db, p), brute);

    const auto empty = make_database(std::vector<std::vector<std::string>>{});
    EXPECT_TRUE(brute_force_mine(empty, p).empty());
    EXPECT_TRUE(mine(empty, p).empty());
}

TEST(Mine, OracleGuards) {
    std::vector<std::vector<std::string>> many(51, {"a"});
    EXPECT_THROW(brute_force_mine(make_database(many), {}), MiningError);
    std::vector<std::vector<std::string>> longer = {std::vector<std::string>(201, "a")};
    EXPECT_THROW(brute_force_mine(make_database(longer), {}), MiningError);
}

TEST(Mine, OrderingRule) {
    const auto db = db_of({{"b", "a", "b"}, {"a", "b"}, {"b", "a"}});
    MiningParams p;
    p.min_len = 1;
    p.max_len = 3;
    p.min_support = MinSupport::absolute(1);
    const auto patterns = mine(db, p);
    for (std::size_t i = 1; i < patterns.size(); ++i) {
        const auto& x = patterns[i - 1];
        const auto& y = patterns[i];
        ASSERT_GE(x.support_total, y.support_total);
        if (x.support_total == y.support_total) {
            ASSERT_LE(x.labels.size(), y.labels.size());
            if (x.labels.size() == y.labels.size()) ASSERT_LT(x.labels, y.labels);
        }
    }
    EXPECT_EQ(patterns[0].labels, std::vector<std::string>{"a"});
}

TEST(MineProperty, MatchesOracleOnRandomCorpora) {
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 150; ++trial) {
        const auto db = testkit::random_database(rng);
        const auto params = testkit::random_params(rng, db.size());
        const auto fast = mine(db, params);
        const auto slow = brute_force_mine(db, params);
        ASSERT_EQ(fast, slow) << "trial " << trial;
    }
}

TEST(MineProperty, AntiMonotone) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto db = testkit::random_database(rng);
        auto params = testkit::random_params(rng, db.size());
        const auto patterns = mine(db, params);
        for (const auto& p : patterns) {
            EXPECT_EQ(count_support(db, p.labels, params.max_delta()), p.support_total);
            for (std::size_t b = 0; b < p.labels.size(); ++b) {
                for (std::size_t e = b + 1; e <= p.labels.size(); ++e) {
                    if (e - b == p.labels.size()) continue;
                    std::vector<std::string> sub(p.labels.begin() + b, p.labels.begin() + e);
                    EXPECT_GE(count_support(db, sub, params.max_delta()), p.support_total);
                }
            }
            EXPECT_EQ(*p.support_hp + *p.support_lp, p.support_total);
        }
    }
}

TEST(MineProperty, WiderGapNeverLosesPatterns) {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        const auto db = testkit::random_database(rng);
        auto params = testkit::random_params(rng, db.size());
        params.max_gap = 1;
        const auto narrow = mine(db, params);
        params.max_gap = 2;
        const auto wide = mine(db, params);
        for (const auto& p : narrow) {
            auto it = std::find_if(wide.begin(), wide.end(), [&](const Pattern& q) { return q.labels == p.labels; });
            ASSERT_NE(it, wide.end());
            EXPECT_GE(it->support_total, p.support_total);
        }
    }
}

TEST(Mine, CorpusDatabaseCarriesGroups) {
    const Corpus c = make_corpus({
        Session{"a-1", "a", {{0, SpeakerRole::Chatbot, {DACode::Q}}, {1, SpeakerRole::Student, {DACode::R}}}},
        Session{"b-1", "b", {{0, SpeakerRole::Chatbot, {DACode::A, DACode::Q}}, {1, SpeakerRole::Student, {DACode::R}}}},
    });
    GroupAssignment g;
    g.learners = {{"a", Group::HP}, {"b", Group::LP}};
    attach_sessions(g, c);
    const auto db = make_database(c, &g);
    EXPECT_TRUE(db.grouped());
    EXPECT_EQ(db.learner_ids[1], "b");
    MiningParams p;
    p.min_support = MinSupport::absolute(2);
    const auto patterns = mine(db, p);
    ASSERT_EQ(patterns.size(), 1u);
    EXPECT_EQ(patterns[0].text(), "[t]Q → [s]R");
    EXPECT_EQ(patterns[0].support_diff(), 0);
}

TEST(Filter, ThresholdBoundary) {
    const std::vector<Pattern> patterns = {
        {{"[t]Q", "[s]R", "[t]Cp"}, 43, 28, 15},
        {{"[t]R", "[t]Q", "[s]R", "[t]A"}, 32, 11, 21},
        {{"[t]A", "[t]Q"}, 29, 19, 10},
    };
    const auto kept = filter_by_support_diff(patterns, 10);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].support_diff(), 13);
    EXPECT_EQ(kept[1].support_diff(), -10);
}

TEST(Closed, DropsAbsorbedPatterns) {
    const std::vector<Pattern> patterns = {
        {{"a", "b"}, 5, 3, 2},
        {{"a", "b", "c"}, 5, 3, 2},
        {{"b", "c"}, 6, 3, 3},
    };
    const auto closed = closed_patterns(patterns);
    ASSERT_EQ(closed.size(), 2u);
    EXPECT_EQ(closed[0].labels.size(), 3u);
    EXPECT_EQ(closed[1].labels, (std::vector<std::string>{"b", "c"}));
}

TEST(PatternIo, CsvRoundTripAndChecks) {
    const std::vector<Pattern> patterns = {{{"[t]Q", "[s]R", "[t]Cp"}, 43, 28, 15}, {{"[s]R", "[t]Cp"}, 45, 28, 17}};
    std::ostringstream out;
    write_patterns_csv(out, patterns);
    EXPECT_NE(out.str().find("[t]Q → [s]R → [t]Cp,3,43,28,15,13"), std::string::npos) << out.str();
    std::istringstream in(out.str());
    EXPECT_EQ(parse_patterns_csv(in), patterns);

    std::istringstream bad("pattern,len,sup_total,sup_hp,sup_lp,sup_diff\n[t]Q → [s]R,2,10,6,3,3\n");
    EXPECT_THROW(parse_patterns_csv(bad), MiningError);
    EXPECT_EQ(split_pattern_text("[t]Q → [s]R"), (std::vector<std::string>{"[t]Q", "[s]R"}));
}

TEST(SequenceDb, TextRoundTrip) {
    std::istringstream in("a b c\n\nb  c\n");
    const auto db = parse_sequence_db(in);
    ASSERT_EQ(db.size(), 2u);
    EXPECT_EQ(db.alphabet, (std::vector<std::string>{"a", "b", "c"}));
    std::ostringstream out;
    write_sequence_db(out, db);
    EXPECT_EQ(out.str(), "a b c\nb c\n");
}
