#ifndef SEQLAB_CORPUS_HPP
#define SEQLAB_CORPUS_HPP

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqlab {

// ---------------------------------------------------------------------------
// Coding scheme
// ---------------------------------------------------------------------------

enum class DACode : std::uint8_t { Q, G, T, S, A, D, M, R, Cr, Cp, Ce };

inline constexpr std::size_t kNumCodes = 11;

inline constexpr std::array<DACode, kNumCodes> kAllCodes = {
    DACode::Q, DACode::G, DACode::T,  DACode::S,  DACode::A, DACode::D,
    DACode::M, DACode::R, DACode::Cr, DACode::Cp, DACode::Ce};

enum class Dimension : std::uint8_t { MeaningFocused, FormFocused };

enum class Function : std::uint8_t { Inviting, Sustaining, ContentFeedback, CorrectiveFeedback };

struct CodeInfo {
    DACode code;
    std::string_view symbol;
    std::string_view name;
    Dimension dimension;
    Function function;
};

const CodeInfo& code_info(DACode code);
std::string_view to_string(DACode code);
std::optional<DACode> parse_code(std::string_view symbol);
std::string_view to_string(Dimension dimension);
std::string_view to_string(Function function);

/// Recast, prompt or explicit correction.
inline bool is_corrective(DACode code) {
    return code_info(code).function == Function::CorrectiveFeedback;
}

enum class SpeakerRole : std::uint8_t { Student, Chatbot };

/// "[s]" or "[t]".
std::string_view prefix(SpeakerRole role);
/// "student" or "chatbot", as used in corpus files.
std::string_view to_string(SpeakerRole role);
std::optional<SpeakerRole> parse_role(std::string_view name);

/// Role-prefixed dialogue-act code, e.g. "[t]Cp". 22 possible values.
struct DALabel {
    SpeakerRole role;
    DACode code;

    static constexpr std::size_t kCount = 2 * kNumCodes;

    constexpr std::size_t index() const {
        return static_cast<std::size_t>(role) * kNumCodes + static_cast<std::size_t>(code);
    }
    static constexpr DALabel from_index(std::size_t i) {
        return {static_cast<SpeakerRole>(i / kNumCodes), static_cast<DACode>(i % kNumCodes)};
    }
    std::string str() const;

    friend constexpr bool operator==(DALabel, DALabel) = default;
    friend constexpr auto operator<=>(DALabel a, DALabel b) { return a.index() <=> b.index(); }
};

std::optional<DALabel> parse_label(std::string_view text);

// ---------------------------------------------------------------------------
// Corpus data model
// ---------------------------------------------------------------------------

struct Turn {
    std::size_t index = 0;
    SpeakerRole speaker = SpeakerRole::Student;
    std::vector<DACode> codes;  // 1..2 distinct codes, annotation order

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Session {
    std::string session_id;
    std::string learner_id;
    std::vector<Turn> turns;

    friend bool operator==(const Session&, const Session&) = default;
};

struct Corpus {
    std::vector<Session> sessions;
    std::set<std::string> learners;

    const Session* find(std::string_view session_id) const;
    std::size_t turn_count() const;

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct EventStream {
    std::string session_id;
    std::vector<DALabel> events;
};

/// Malformed corpus input. line() is the 1-based JSONL line, 0 when unknown.
class CorpusError : public std::runtime_error {
public:
    explicit CorpusError(const std::string& message, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct LoadedCorpus {
    Corpus corpus;
    std::size_t removed_empty_turns = 0;
    std::vector<std::string> warnings;
};

/// Parses JSON Lines, one session per line:
///   {"session_id": str, "learner_id": str,
///    "turns": [{"speaker": "student"|"chatbot", "codes": [str, ...]}]}
/// Turns with no codes are dropped (and counted); remaining turns are
/// re-indexed from 0. Unknown top-level keys produce a warning.
LoadedCorpus parse_corpus(std::istream& in);
LoadedCorpus load_corpus(const std::filesystem::path& path);

/// Inverse of parse_corpus for a cleaned corpus.
void write_corpus(std::ostream& out, const Corpus& corpus);

/// Builds a Corpus from sessions, filling the learner set.
Corpus make_corpus(std::vector<Session> sessions);

// ---------------------------------------------------------------------------
// Validation, flattening, summaries
// ---------------------------------------------------------------------------

enum class Severity : std::uint8_t { Warning, Error };

struct Issue {
    Severity severity;
    std::string session_id;
    std::optional<std::size_t> turn;
    std::string message;
};

struct ValidationReport {
    std::vector<Issue> issues;

    std::size_t error_count() const;
    std::size_t warning_count() const;
    bool ok() const { return error_count() == 0; }
};

/// Structural checks are errors. Corrective-feedback codes on student turns
/// are warnings: the scheme allows them but they are not expected in data.
ValidationReport validate_corpus(const Corpus& corpus);

EventStream flatten(const Session& session);
std::vector<EventStream> flatten(const Corpus& corpus);

struct LabelCount {
    DALabel label;
    std::size_t count;
};

/// Sorts by descending count, ties by label text.
void sort_canonical(std::vector<LabelCount>& counts);

/// Non-zero per-label counts in canonical order.
std::vector<LabelCount> label_counts(const Corpus& corpus);
std::vector<LabelCount> label_counts(const Session& session);

struct CorpusSummary {
    std::size_t sessions = 0;
    std::size_t learners = 0;
    std::size_t turns = 0;
    std::size_t total_events = 0;
    std::optional<double> mean_turns_per_session;  // empty for an empty corpus
    std::vector<LabelCount> label_counts;
};

CorpusSummary summarize(const Corpus& corpus);

}  // namespace seqlab

#endif  // SEQLAB_CORPUS_HPP
