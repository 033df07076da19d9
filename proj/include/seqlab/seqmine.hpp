#ifndef SEQLAB_SEQMINE_HPP
#define SEQLAB_SEQMINE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqlab/corpus.hpp"
#include "seqlab/scoring.hpp"

namespace seqlab {

class MiningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Symbol = std::uint32_t;

/// Sequences of interned labels. The alphabet is sorted, so comparing symbol
/// ids is the same as comparing label text.
struct SequenceDatabase {
    std::vector<std::string> alphabet;
    std::vector<std::vector<Symbol>> sequences;
    std::vector<std::string> ids;
    std::vector<std::string> learner_ids;  // empty strings when unknown
    std::vector<std::optional<Group>> groups;

    std::size_t size() const { return sequences.size(); }
    std::optional<Symbol> symbol(std::string_view label) const;
    /// nullopt if any label is outside the alphabet.
    std::optional<std::vector<Symbol>> encode(std::span<const std::string> labels) const;
    /// True when every sequence has a group. Throws if only some do.
    bool grouped() const;
};

SequenceDatabase make_database(const std::vector<std::vector<std::string>>& sequences);
/// One sequence per session (flattened DA stream), labelled "[s]R" etc.
SequenceDatabase make_database(const Corpus& corpus, const GroupAssignment* groups = nullptr);

/// Plain text: one sequence per line, whitespace-separated labels. Blank
/// lines are skipped.
SequenceDatabase parse_sequence_db(std::istream& in);
void write_sequence_db(std::ostream& out, const SequenceDatabase& db);

/// How max_gap is read: PositionDelta allows consecutive matched elements
/// at most max_gap positions apart (1 = adjacent); Intervening allows up to
/// max_gap unmatched events between them.
enum class GapMode : std::uint8_t { PositionDelta, Intervening };

class MinSupport {
public:
    static MinSupport absolute(std::size_t sessions);
    static MinSupport fraction(double share);

    bool is_fraction() const { return is_fraction_; }
    double value() const { return value_; }
    /// Session count threshold for a database of n sequences (ceiling, at least 1).
    std::size_t resolve(std::size_t n) const;

private:
    MinSupport(bool is_fraction, double value) : is_fraction_(is_fraction), value_(value) {}
    bool is_fraction_;
    double value_;
};

struct MiningParams {
    std::size_t min_len = 2;
    std::size_t max_len = 4;
    std::size_t max_gap = 1;
    MinSupport min_support = MinSupport::fraction(0.20);
    GapMode gap_mode = GapMode::PositionDelta;

    void validate() const;
    /// Largest allowed position difference between consecutive elements.
    std::size_t max_delta() const { return gap_mode == GapMode::PositionDelta ? max_gap : max_gap + 1; }
};

struct Pattern {
    std::vector<std::string> labels;
    std::size_t support_total = 0;
    std::optional<std::size_t> support_hp;
    std::optional<std::size_t> support_lp;

    bool grouped() const { return support_hp.has_value() && support_lp.has_value(); }
    /// HP minus LP support; throws MiningError if ungrouped.
    long support_diff() const;
    std::string text() const;  // labels joined by " → "

    friend bool operator==(const Pattern&, const Pattern&) = default;
};

/// Descending support, then ascending length, then label text.
void sort_patterns(std::vector<Pattern>& patterns);

/// True iff positions p1 < ... < pk exist with stream[pi] == pattern[i] and
/// p(i+1) - pi <= max_delta. An empty pattern trivially occurs.
bool occurs(std::span<const Symbol> stream, std::span<const Symbol> pattern, std::size_t max_delta);
bool occurs(const EventStream& stream, std::span<const DALabel> pattern, std::size_t max_gap,
            GapMode mode = GapMode::PositionDelta);

/// Frequent gap-constrained sequential patterns via vertical position bitmaps
/// with co-occurrence-map pruning. Group supports are filled when the
/// database is grouped.
std::vector<Pattern> mine(const SequenceDatabase& db, const MiningParams& params);

/// Exhaustive reference miner for small inputs (<= 50 sequences of length
/// <= 200 over <= 22 symbols). Same output contract as mine().
std::vector<Pattern> brute_force_mine(const SequenceDatabase& db, const MiningParams& params);

/// Keeps patterns with |support_hp - support_lp| >= threshold, order preserved.
std::vector<Pattern> filter_by_support_diff(std::span<const Pattern> patterns, long threshold);

/// Drops patterns contained contiguously in a longer pattern of equal support.
std::vector<Pattern> closed_patterns(std::span<const Pattern> patterns);

/// Columns: pattern,len,sup_total,sup_hp,sup_lp,sup_diff
void write_patterns_csv(std::ostream& out, std::span<const Pattern> patterns);
std::vector<Pattern> parse_patterns_csv(std::istream& in);
void write_patterns_markdown(std::ostream& out, std::span<const Pattern> patterns);

std::vector<std::string> split_pattern_text(std::string_view text);

}  // namespace seqlab

#endif  // SEQLAB_SEQMINE_HPP
