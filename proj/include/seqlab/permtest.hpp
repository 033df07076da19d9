#ifndef SEQLAB_PERMTEST_HPP
#define SEQLAB_PERMTEST_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlab/scoring.hpp"
#include "seqlab/seqmine.hpp"

namespace seqlab {

class PermutationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Learners are the exchangeable units: a relabelling moves all of a
/// learner's sessions together.
struct ClusterDesign {
    std::vector<std::string> learners;              // ascending
    std::vector<std::vector<std::size_t>> sessions;  // database indices per learner
    std::vector<Group> observed;                    // per learner

    std::size_t n_hp() const;
    std::size_t n_lp() const { return learners.size() - n_hp(); }

    /// Requires learner ids and groups on every sequence, with a single
    /// group per learner.
    static ClusterDesign from_database(const SequenceDatabase& db);
};

/// Number of learner relabellings with the observed group sizes, C(n, k),
/// saturated at UINT64_MAX.
std::uint64_t assignment_count(const ClusterDesign& design);

enum class PermutationMode : std::uint8_t { Exact, MonteCarlo };
enum class ModeRequest : std::uint8_t { Auto, Exact, MonteCarlo };

enum class Statistic : std::uint8_t {
    SupportDifference,     // HP sessions with the pattern minus LP sessions
    ProportionDifference,  // same, as shares of each group's sessions
};

struct PermutationOptions {
    ModeRequest mode = ModeRequest::Auto;
    std::size_t n_permutations = 10'000;  // Monte-Carlo draws
    std::uint64_t seed = 1;
    std::uint64_t exact_cap = 1'000'000;
    Statistic statistic = Statistic::SupportDifference;
    std::size_t max_gap = 1;
    GapMode gap_mode = GapMode::PositionDelta;
    double alpha = 0.05;
    double marginal = 0.10;
};

struct PermutationResult {
    std::vector<std::string> pattern;
    std::size_t support_hp = 0;
    std::size_t support_lp = 0;
    double observed = 0.0;
    double p_raw = 1.0;
    double p_adj = 1.0;
    PermutationMode mode = PermutationMode::Exact;
    std::uint64_t n_permutations = 0;  // denominator of p_raw
    std::uint64_t n_extreme = 0;       // numerator of p_raw
    std::optional<std::uint64_t> seed;
    bool significant = false;  // p_adj < alpha
    bool marginal = false;     // alpha <= p_adj < marginal

    long support_diff() const { return static_cast<long>(support_hp) - static_cast<long>(support_lp); }
    /// "*", "†" or "".
    std::string flag() const;
};

/// HP minus LP sessions containing the pattern, using the database's groups.
long pattern_stat(const SequenceDatabase& db, std::span<const std::string> pattern, std::size_t max_gap,
                  GapMode mode = GapMode::PositionDelta);

/// Two-sided: p = #{assignments with |stat| >= |observed|} / C(n, k).
PermutationResult exact_permutation_test(std::span<const std::string> pattern, const SequenceDatabase& db,
                                         const ClusterDesign& design, const PermutationOptions& options = {});

/// p = (1 + #{draws with |stat| >= |observed|}) / (1 + n). Draw i uses its own
/// generator derived from (seed, i), so results do not depend on draw order.
PermutationResult monte_carlo_permutation_test(std::span<const std::string> pattern, const SequenceDatabase& db,
                                               const ClusterDesign& design, const PermutationOptions& options = {});

/// Tests every pattern (exact when C(n, k) <= exact_cap under Auto) and
/// applies Holm over the whole set.
std::vector<PermutationResult> test_pattern_set(std::span<const Pattern> patterns, const SequenceDatabase& db,
                                                const ClusterDesign& design, const PermutationOptions& options = {});

/// Columns: pattern,hp_sup,lp_sup,sup_diff,p,p_adj,flag
void write_permutation_csv(std::ostream& out, std::span<const PermutationResult> results);
void write_permutation_markdown(std::ostream& out, std::span<const PermutationResult> results);

}  // namespace seqlab

#endif  // SEQLAB_PERMTEST_HPP
