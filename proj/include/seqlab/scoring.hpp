#ifndef SEQLAB_SCORING_HPP
#define SEQLAB_SCORING_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqlab/corpus.hpp"

namespace seqlab {

class ScoringError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The six CAF indicators, in proficiency-file column order.
enum class Indicator : std::uint8_t {
    LexicalComplexity,       // non-A1 words per 100 words
    GrammaticalComplexity,   // clauses per AS-unit
    LexicalAccuracy,         // lexical misuses per 100 words
    GrammaticalAccuracy,     // grammatical errors per 100 words
    SpeedFluency,            // words per articulation time
    BreakdownRepairFluency,  // composite dysfluency rate
};

inline constexpr std::size_t kNumIndicators = 6;

/// Column name in the proficiency CSV (lex_cx, gram_cx, ...).
std::string_view column_name(Indicator indicator);
std::optional<Indicator> parse_indicator(std::string_view column);

enum class Timepoint : std::uint8_t { Pre, Post };
std::string_view to_string(Timepoint t);

struct ProficiencyRecord {
    std::string learner_id;
    Timepoint timepoint = Timepoint::Pre;
    std::array<double, kNumIndicators> indicators{};
};

/// +1 where higher raw values mean better proficiency, -1 where lower is better.
using Orientation = std::array<int, kNumIndicators>;

/// Accuracy (error-rate) and breakdown/repair indicators are lower-is-better.
Orientation default_orientation();

enum class Standardization : std::uint8_t {
    WithinTimepoint,  // z-scores across learners at each timepoint
    Pooled,           // z-scores across all records of both timepoints
};

struct ScoringOptions {
    Orientation orientation = default_orientation();
    Standardization standardization = Standardization::WithinTimepoint;
};

struct CompositeScore {
    std::string learner_id;
    Timepoint timepoint = Timepoint::Pre;
    std::array<double, kNumIndicators> z{};  // oriented z-scores
    double composite = 0.0;
};

/// (x - mean) / sd using the sample standard deviation.
std::vector<double> zscore(std::span<const double> values);

/// Output is ordered by learner_id, pre before post.
std::vector<CompositeScore> composite_scores(std::span<const ProficiencyRecord> records,
                                             const ScoringOptions& options = {});

enum class Group : std::uint8_t { HP, LP };
std::string_view to_string(Group g);
std::optional<Group> parse_group(std::string_view text);

struct GainRecord {
    std::string learner_id;
    double pre = 0.0;
    double post = 0.0;
    double gain = 0.0;
};

struct GroupAssignment {
    std::map<std::string, Group> learners;
    std::map<std::string, Group> sessions;

    std::optional<Group> learner_group(const std::string& learner_id) const;
    std::optional<Group> session_group(const std::string& session_id) const;
};

struct Grouping {
    std::vector<GainRecord> gains;  // sorted by gain descending, ties by learner_id
    GroupAssignment assignment;
    std::vector<std::string> warnings;
};

/// Median split on pre-post gain: the top floor(n/2) learners are HP.
/// Sessions are attached when a corpus is supplied.
Grouping gains_and_groups(std::span<const CompositeScore> scores, const Corpus* corpus = nullptr);

/// Fills `assignment.sessions` from learner groups; throws if a session's
/// learner has no group.
void attach_sessions(GroupAssignment& assignment, const Corpus& corpus);

/// CSV header: learner_id,timepoint,lex_cx,gram_cx,lex_acc,gram_acc,speed_flu,bdr_flu
std::vector<ProficiencyRecord> parse_proficiency_csv(std::istream& in);
std::vector<ProficiencyRecord> load_proficiency(const std::filesystem::path& path);

/// CSV header: learner_id,group
std::map<std::string, Group> parse_groups_csv(std::istream& in);
void write_groups_csv(std::ostream& out, const std::map<std::string, Group>& groups);

}  // namespace seqlab

#endif  // SEQLAB_SCORING_HPP
