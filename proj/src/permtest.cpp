#include "seqlab/permtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "seqlab/csv.hpp"
#include "seqlab/freqstats.hpp"
#include "seqlab/rng.hpp"

namespace seqlab {

namespace {

constexpr double kTieTolerance = 1e-9;

std::size_t delta_of(const PermutationOptions& o) {
    return o.gap_mode == GapMode::PositionDelta ? o.max_gap : o.max_gap + 1;
}

// Per-learner counts that every relabelling statistic is built from.
struct LearnerTotals {
    std::vector<double> present;   // sessions containing the pattern
    std::vector<double> sessions;  // all sessions
    std::size_t hp_present = 0;
    std::size_t lp_present = 0;
};

LearnerTotals tally(std::span<const std::string> pattern, const SequenceDatabase& db, const ClusterDesign& design,
                    const PermutationOptions& options) {
    if (pattern.empty()) throw PermutationError("empty pattern");
    const auto encoded = db.encode(pattern);
    const std::size_t delta = delta_of(options);
    LearnerTotals t;
    t.present.assign(design.learners.size(), 0.0);
    t.sessions.assign(design.learners.size(), 0.0);
    for (std::size_t l = 0; l < design.learners.size(); ++l) {
        for (std::size_t s : design.sessions[l]) {
            t.sessions[l] += 1.0;
            if (encoded && occurs(db.sequences[s], *encoded, delta)) {
                t.present[l] += 1.0;
                ++(design.observed[l] == Group::HP ? t.hp_present : t.lp_present);
            }
        }
    }
    return t;
}

class StatisticEvaluator {
public:
    StatisticEvaluator(const LearnerTotals& totals, Statistic statistic) : totals_(totals), statistic_(statistic) {
        all_present_ = std::accumulate(totals.present.begin(), totals.present.end(), 0.0);
        all_sessions_ = std::accumulate(totals.sessions.begin(), totals.sessions.end(), 0.0);
    }

    // `hp` lists the learners labelled HP.
    double operator()(std::span<const std::size_t> hp) const {
        double hp_present = 0.0, hp_sessions = 0.0;
        for (std::size_t l : hp) {
            hp_present += totals_.present[l];
            hp_sessions += totals_.sessions[l];
        }
        const double lp_present = all_present_ - hp_present;
        if (statistic_ == Statistic::SupportDifference) return hp_present - lp_present;
        const double lp_sessions = all_sessions_ - hp_sessions;
        const double hp_share = hp_sessions > 0 ? hp_present / hp_sessions : 0.0;
        const double lp_share = lp_sessions > 0 ? lp_present / lp_sessions : 0.0;
        return hp_share - lp_share;
    }

private:
    const LearnerTotals& totals_;
    Statistic statistic_;
    double all_present_ = 0.0;
    double all_sessions_ = 0.0;
};

std::vector<std::size_t> observed_hp(const ClusterDesign& design) {
    std::vector<std::size_t> hp;
    for (std::size_t l = 0; l < design.learners.size(); ++l) {
        if (design.observed[l] == Group::HP) hp.push_back(l);
    }
    return hp;
}

void check_design(const ClusterDesign& design) {
    if (design.learners.empty()) throw PermutationError("design has no learners");
    if (design.sessions.size() != design.learners.size() || design.observed.size() != design.learners.size()) {
        throw PermutationError("inconsistent cluster design");
    }
}

PermutationResult base_result(std::span<const std::string> pattern, const LearnerTotals& t, double observed) {
    PermutationResult r;
    r.pattern.assign(pattern.begin(), pattern.end());
    r.support_hp = t.hp_present;
    r.support_lp = t.lp_present;
    r.observed = observed;
    return r;
}

}  // namespace

std::size_t ClusterDesign::n_hp() const {
    return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), Group::HP));
}

ClusterDesign ClusterDesign::from_database(const SequenceDatabase& db) {
    if (!db.grouped()) throw PermutationError("database sequences carry no groups");
    std::map<std::string, std::pair<Group, std::vector<std::size_t>>> by_learner;
    for (std::size_t s = 0; s < db.size(); ++s) {
        const std::string& learner = db.learner_ids[s];
        if (learner.empty()) throw PermutationError("sequence " + db.ids[s] + " has no learner id");
        auto [it, inserted] = by_learner.try_emplace(learner, *db.groups[s], std::vector<std::size_t>{});
        if (!inserted && it->second.first != *db.groups[s]) {
            throw PermutationError("learner " + learner + " has sessions in both groups");
        }
        it->second.second.push_back(s);
    }
    ClusterDesign design;
    for (auto& [learner, entry] : by_learner) {
        design.learners.push_back(learner);
        design.observed.push_back(entry.first);
        design.sessions.push_back(std::move(entry.second));
    }
    return design;
}

std::uint64_t assignment_count(const ClusterDesign& design) {
    const std::uint64_t n = design.learners.size();
    const std::uint64_t k = std::min<std::uint64_t>(design.n_hp(), n - design.n_hp());
    std::uint64_t c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        const std::uint64_t factor = n - k + i;
        const std::uint64_t g = std::gcd(c, i);
        const std::uint64_t reduced = c / g;
        const std::uint64_t divisor = i / g;
        if (reduced > UINT64_MAX / factor) return UINT64_MAX;
        c = reduced * (factor / divisor);
    }
    return c;
}

std::string PermutationResult::flag() const {
    if (significant) return "*";
    if (marginal) return "†";
    return "";
}

long pattern_stat(const SequenceDatabase& db, std::span<const std::string> pattern, std::size_t max_gap,
                  GapMode mode) {
    if (!db.grouped()) throw PermutationError("database sequences carry no groups");
    const auto encoded = db.encode(pattern);
    if (!encoded) return 0;
    const std::size_t delta = mode == GapMode::PositionDelta ? max_gap : max_gap + 1;
    long stat = 0;
    for (std::size_t s = 0; s < db.size(); ++s) {
        if (occurs(db.sequences[s], *encoded, delta)) stat += *db.groups[s] == Group::HP ? 1 : -1;
    }
    return stat;
}

PermutationResult exact_permutation_test(std::span<const std::string> pattern, const SequenceDatabase& db,
                                         const ClusterDesign& design, const PermutationOptions& options) {
    check_design(design);
    const std::uint64_t total = assignment_count(design);
    if (total > options.exact_cap) {
        throw PermutationError(fmt::format("exact enumeration needs {} assignments (cap {}); use Monte Carlo", total,
                                           options.exact_cap));
    }
    const LearnerTotals totals = tally(pattern, db, design, options);
    const StatisticEvaluator stat(totals, options.statistic);
    const auto hp_observed = observed_hp(design);
    const double observed = stat(hp_observed);
    const double threshold = std::abs(observed) - kTieTolerance;

    // Walk every k-subset of learners in lexicographic order.
    const std::size_t n = design.learners.size();
    const std::size_t k = hp_observed.size();
    std::vector<std::size_t> subset(k);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    std::uint64_t visited = 0, extreme = 0;
    while (true) {
        ++visited;
        if (std::abs(stat(subset)) >= threshold) ++extreme;
        std::size_t i = k;
        while (i > 0 && subset[i - 1] == n - k + i - 1) --i;
        if (i == 0) break;
        ++subset[i - 1];
        for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }

    PermutationResult r = base_result(pattern, totals, observed);
    r.mode = PermutationMode::Exact;
    r.n_permutations = visited;
    r.n_extreme = extreme;
    r.p_raw = static_cast<double>(extreme) / static_cast<double>(visited);
    r.p_adj = r.p_raw;
    return r;
}

PermutationResult monte_carlo_permutation_test(std::span<const std::string> pattern, const SequenceDatabase& db,
                                               const ClusterDesign& design, const PermutationOptions& options) {
    check_design(design);
    if (options.n_permutations < 100) throw PermutationError("Monte-Carlo permutation count must be >= 100");
    const LearnerTotals totals = tally(pattern, db, design, options);
    const StatisticEvaluator stat(totals, options.statistic);
    const auto hp_observed = observed_hp(design);
    const double observed = stat(hp_observed);
    const double threshold = std::abs(observed) - kTieTolerance;

    const std::size_t n = design.learners.size();
    const std::size_t k = hp_observed.size();
    std::vector<std::size_t> order(n);
    std::uint64_t extreme = 0;
    for (std::uint64_t draw = 0; draw < options.n_permutations; ++draw) {
        rng::Engine engine = rng::make_engine(options.seed, draw);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng::bounded(engine, n - i));
            std::swap(order[i], order[j]);
        }
        if (std::abs(stat(std::span<const std::size_t>(order.data(), k))) >= threshold) ++extreme;
    }

    PermutationResult r = base_result(pattern, totals, observed);
    r.mode = PermutationMode::MonteCarlo;
    r.n_permutations = options.n_permutations + 1;
    r.n_extreme = extreme + 1;
    r.p_raw = static_cast<double>(r.n_extreme) / static_cast<double>(r.n_permutations);
    r.p_adj = r.p_raw;
    r.seed = options.seed;
    return r;
}

std::vector<PermutationResult> test_pattern_set(std::span<const Pattern> patterns, const SequenceDatabase& db,
                                                const ClusterDesign& design, const PermutationOptions& options) {
    if (patterns.empty()) throw PermutationError("no patterns to test");
    bool exact = options.mode == ModeRequest::Exact;
    if (options.mode == ModeRequest::Auto) exact = assignment_count(design) <= options.exact_cap;

    std::vector<PermutationResult> results;
    results.reserve(patterns.size());
    for (const auto& p : patterns) {
        results.push_back(exact ? exact_permutation_test(p.labels, db, design, options)
                                : monte_carlo_permutation_test(p.labels, db, design, options));
    }
    std::vector<double> raw;
    for (const auto& r : results) raw.push_back(r.p_raw);
    const auto adjusted = holm_bonferroni(raw);
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].p_adj = adjusted[i];
        results[i].significant = adjusted[i] < options.alpha;
        results[i].marginal = !results[i].significant && adjusted[i] < options.marginal;
    }
    return results;
}

void write_permutation_csv(std::ostream& out, std::span<const PermutationResult> results) {
    csv::Writer w(out);
    w.row({"pattern", "hp_sup", "lp_sup", "sup_diff", "p", "p_adj", "flag"});
    for (const auto& r : results) {
        Pattern p{r.pattern, 0, {}, {}};
        w.row({p.text(), std::to_string(r.support_hp), std::to_string(r.support_lp), std::to_string(r.support_diff()),
               fmt::format("{:.6f}", r.p_raw), fmt::format("{:.6f}", r.p_adj), r.flag()});
    }
}

void write_permutation_markdown(std::ostream& out, std::span<const PermutationResult> results) {
    out << "| # | Patterns | HP SUP | LP SUP | SUP DIFF | p | p_adj |\n";
    out << "|---:|---|---:|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        Pattern p{r.pattern, 0, {}, {}};
        out << fmt::format("| {} | {} | {} | {} | {} | {:.3f} | {:.3f}{} |\n", i + 1, p.text(), r.support_hp,
                           r.support_lp, r.support_diff(), r.p_raw, r.p_adj, r.flag());
    }
}

}  // namespace seqlab
