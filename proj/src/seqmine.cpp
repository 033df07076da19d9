#include "seqlab/seqmine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "seqlab/csv.hpp"

namespace seqlab {

// ---------------------------------------------------------------------------
// Sequence database
// ---------------------------------------------------------------------------

std::optional<Symbol> SequenceDatabase::symbol(std::string_view label) const {
    auto it = std::lower_bound(alphabet.begin(), alphabet.end(), label);
    if (it == alphabet.end() || *it != label) return std::nullopt;
    return static_cast<Symbol>(it - alphabet.begin());
}

std::optional<std::vector<Symbol>> SequenceDatabase::encode(std::span<const std::string> labels) const {
    std::vector<Symbol> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        auto s = symbol(l);
        if (!s) return std::nullopt;
        out.push_back(*s);
    }
    return out;
}

bool SequenceDatabase::grouped() const {
    const auto n_grouped = std::count_if(groups.begin(), groups.end(), [](const auto& g) { return g.has_value(); });
    if (n_grouped == 0) return false;
    if (static_cast<std::size_t>(n_grouped) != sequences.size()) {
        throw MiningError("only some sequences have a group");
    }
    return true;
}

SequenceDatabase make_database(const std::vector<std::vector<std::string>>& sequences) {
    SequenceDatabase db;
    for (const auto& seq : sequences) db.alphabet.insert(db.alphabet.end(), seq.begin(), seq.end());
    std::sort(db.alphabet.begin(), db.alphabet.end());
    db.alphabet.erase(std::unique(db.alphabet.begin(), db.alphabet.end()), db.alphabet.end());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        std::vector<Symbol> encoded;
        encoded.reserve(sequences[i].size());
        for (const auto& label : sequences[i]) encoded.push_back(*db.symbol(label));
        db.sequences.push_back(std::move(encoded));
        db.ids.push_back("seq" + std::to_string(i + 1));
        db.learner_ids.emplace_back();
        db.groups.emplace_back();
    }
    return db;
}

SequenceDatabase make_database(const Corpus& corpus, const GroupAssignment* groups) {
    std::vector<std::vector<std::string>> labels;
    labels.reserve(corpus.sessions.size());
    for (const auto& session : corpus.sessions) {
        std::vector<std::string> seq;
        for (const auto& event : flatten(session).events) seq.push_back(event.str());
        labels.push_back(std::move(seq));
    }
    SequenceDatabase db = make_database(labels);
    for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
        const auto& session = corpus.sessions[i];
        db.ids[i] = session.session_id;
        db.learner_ids[i] = session.learner_id;
        if (groups) {
            db.groups[i] = groups->session_group(session.session_id);
            if (!db.groups[i]) db.groups[i] = groups->learner_group(session.learner_id);
            if (!db.groups[i]) throw MiningError("session " + session.session_id + " has no group");
        }
    }
    return db;
}

SequenceDatabase parse_sequence_db(std::istream& in) {
    std::vector<std::vector<std::string>> sequences;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream tokens(line);
        std::vector<std::string> seq;
        for (std::string token; tokens >> token;) seq.push_back(std::move(token));
        if (!seq.empty()) sequences.push_back(std::move(seq));
    }
    return make_database(sequences);
}

void write_sequence_db(std::ostream& out, const SequenceDatabase& db) {
    for (const auto& seq : db.sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << db.alphabet[seq[i]];
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Parameters and patterns
// ---------------------------------------------------------------------------

MinSupport MinSupport::absolute(std::size_t sessions) {
    if (sessions == 0) throw MiningError("absolute minimum support must be >= 1");
    return MinSupport(false, static_cast<double>(sessions));
}

MinSupport MinSupport::fraction(double share) {
    if (!(share > 0.0 && share <= 1.0)) throw MiningError("fractional minimum support must be in (0, 1]");
    return MinSupport(true, share);
}

std::size_t MinSupport::resolve(std::size_t n) const {
    if (!is_fraction_) return static_cast<std::size_t>(value_);
    // The epsilon keeps products such as 0.2 * 70 from rounding up past 14.
    const double raw = std::ceil(value_ * static_cast<double>(n) - 1e-9);
    return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

void MiningParams::validate() const {
    if (min_len < 1) throw MiningError("min_len must be >= 1");
    if (max_len < min_len) throw MiningError("max_len must be >= min_len");
    if (max_gap < 1) throw MiningError("max_gap must be >= 1");
}

long Pattern::support_diff() const {
    if (!grouped()) throw MiningError("pattern " + text() + " has no group supports");
    return static_cast<long>(*support_hp) - static_cast<long>(*support_lp);
}

std::string Pattern::text() const {
    std::string out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out += " → ";
        out += labels[i];
    }
    return out;
}

void sort_patterns(std::vector<Pattern>& patterns) {
    std::stable_sort(patterns.begin(), patterns.end(), [](const Pattern& a, const Pattern& b) {
        if (a.support_total != b.support_total) return a.support_total > b.support_total;
        if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
        return a.labels < b.labels;
    });
}

bool occurs(std::span<const Symbol> stream, std::span<const Symbol> pattern, std::size_t max_delta) {
    if (pattern.empty()) return true;
    const std::size_t n = stream.size();
    std::vector<char> reach(n), next(n);
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) any |= (reach[j] = stream[j] == pattern[0]);
    for (std::size_t k = 1; k < pattern.size() && any; ++k) {
        // Sliding count of reachable positions in [j - max_delta, j - 1].
        std::size_t window = 0;
        any = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (j >= 1) window += reach[j - 1];
            if (j >= max_delta + 1) window -= reach[j - max_delta - 1];
            next[j] = window > 0 && stream[j] == pattern[k];
            any |= next[j];
        }
        std::swap(reach, next);
    }
    return any;
}

bool occurs(const EventStream& stream, std::span<const DALabel> pattern, std::size_t max_gap, GapMode mode) {
    std::vector<Symbol> s, p;
    s.reserve(stream.events.size());
    for (auto e : stream.events) s.push_back(static_cast<Symbol>(e.index()));
    for (auto e : pattern) p.push_back(static_cast<Symbol>(e.index()));
    return occurs(s, p, mode == GapMode::PositionDelta ? max_gap : max_gap + 1);
}

// ---------------------------------------------------------------------------
// Vertical bitmap miner
// ---------------------------------------------------------------------------

namespace {

// All sequences share one bit vector; sequence s owns bits
// [offset[s], offset[s] + len[s]) followed by max_delta zero bits, so a
// shift by up to max_delta never carries a match into the next sequence.
class Layout {
public:
    Layout(const SequenceDatabase& db, std::size_t pad) {
        offsets_.reserve(db.size() + 1);
        std::size_t bit = 0;
        for (const auto& seq : db.sequences) {
            offsets_.push_back(bit);
            bit += seq.size() + pad;
        }
        offsets_.push_back(bit);
        words_ = (bit + 63) / 64;
    }

    std::size_t words() const { return words_; }
    std::size_t offset(std::size_t s) const { return offsets_[s]; }
    std::size_t total_bits() const { return offsets_.back(); }

    std::size_t sequence_of(std::size_t bit) const {
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), bit);
        return static_cast<std::size_t>(it - offsets_.begin()) - 1;
    }

private:
    std::vector<std::size_t> offsets_;
    std::size_t words_ = 0;
};

using Bitmap = std::vector<std::uint64_t>;

std::size_t next_set(const Bitmap& bm, std::size_t from) {
    std::size_t w = from / 64;
    if (w >= bm.size()) return SIZE_MAX;
    std::uint64_t word = bm[w] & (~std::uint64_t{0} << (from % 64));
    while (true) {
        if (word) return w * 64 + static_cast<std::size_t>(std::countr_zero(word));
        if (++w >= bm.size()) return SIZE_MAX;
        word = bm[w];
    }
}

// OR of the bitmap shifted forward by 1..max_delta positions: bit j is set
// iff some match end lies in [j - max_delta, j - 1].
void extension_window(const Bitmap& in, std::size_t max_delta, Bitmap& out) {
    std::fill(out.begin(), out.end(), 0);
    const std::size_t n = in.size();
    for (std::size_t d = 1; d <= max_delta; ++d) {
        const std::size_t word_shift = d / 64;
        const unsigned bit_shift = static_cast<unsigned>(d % 64);
        for (std::size_t w = n; w-- > word_shift;) {
            const std::size_t src = w - word_shift;
            std::uint64_t v = in[src] << bit_shift;
            if (bit_shift && src > 0) v |= in[src - 1] >> (64 - bit_shift);
            out[w] |= v;
        }
    }
}

struct Counts {
    std::size_t total = 0;
    std::size_t hp = 0;
    std::size_t lp = 0;
};

class BitmapMiner {
public:
    BitmapMiner(const SequenceDatabase& db, const MiningParams& params)
        : db_(db),
          params_(params),
          delta_(params.max_delta()),
          min_support_(params.min_support.resolve(db.size())),
          grouped_(db.grouped()),
          layout_(db, delta_) {}

    std::vector<Pattern> run() {
        build_item_bitmaps();
        build_cooccurrence_map();
        std::vector<Symbol> prefix;
        for (std::size_t i = 0; i < frequent_.size(); ++i) {
            prefix.assign(1, frequent_[i]);
            grow(prefix, i, items_[frequent_[i]], item_counts_[frequent_[i]]);
        }
        sort_patterns(out_);
        return std::move(out_);
    }

private:
    void build_item_bitmaps() {
        const std::size_t alphabet = db_.alphabet.size();
        items_.assign(alphabet, Bitmap(layout_.words(), 0));
        for (std::size_t s = 0; s < db_.size(); ++s) {
            const std::size_t base = layout_.offset(s);
            const auto& seq = db_.sequences[s];
            for (std::size_t j = 0; j < seq.size(); ++j) {
                const std::size_t bit = base + j;
                items_[seq[j]][bit / 64] |= std::uint64_t{1} << (bit % 64);
            }
        }
        item_counts_.resize(alphabet);
        for (Symbol x = 0; x < alphabet; ++x) {
            item_counts_[x] = count(items_[x]);
            if (item_counts_[x].total >= min_support_) {
                frequent_index_.emplace(x, frequent_.size());
                frequent_.push_back(x);
            }
        }
    }

    // cmap_[a][b]: sessions in which frequent item b follows frequent item a
    // within max_delta. A pattern ending in a cannot be extended by b when
    // this is below the threshold, because [a, b] is a contiguous part of the
    // extension.
    void build_cooccurrence_map() {
        const std::size_t f = frequent_.size();
        cmap_.assign(f * f, 0);
        std::vector<std::size_t> last_seen(f * f, SIZE_MAX);
        std::vector<std::size_t> local(db_.alphabet.size(), SIZE_MAX);
        for (const auto& [sym, idx] : frequent_index_) local[sym] = idx;
        for (std::size_t s = 0; s < db_.size(); ++s) {
            const auto& seq = db_.sequences[s];
            for (std::size_t i = 0; i < seq.size(); ++i) {
                const std::size_t a = local[seq[i]];
                if (a == SIZE_MAX) continue;
                for (std::size_t j = i + 1; j < seq.size() && j - i <= delta_; ++j) {
                    const std::size_t b = local[seq[j]];
                    if (b == SIZE_MAX) continue;
                    const std::size_t cell = a * f + b;
                    if (last_seen[cell] != s) {
                        last_seen[cell] = s;
                        ++cmap_[cell];
                    }
                }
            }
        }
    }

    Counts count(const Bitmap& bm) const {
        Counts c;
        std::size_t bit = next_set(bm, 0);
        while (bit != SIZE_MAX) {
            const std::size_t s = layout_.sequence_of(bit);
            ++c.total;
            if (grouped_) ++(*db_.groups[s] == Group::HP ? c.hp : c.lp);
            bit = next_set(bm, layout_.offset(s + 1));
        }
        return c;
    }

    void grow(std::vector<Symbol>& prefix, std::size_t last, const Bitmap& ends, const Counts& counts) {
        if (prefix.size() >= params_.min_len) emit(prefix, counts);
        if (prefix.size() >= params_.max_len) return;

        Bitmap window(layout_.words());
        extension_window(ends, delta_, window);
        Bitmap candidate(layout_.words());
        const std::size_t f = frequent_.size();
        for (std::size_t next = 0; next < f; ++next) {
            if (cmap_[last * f + next] < min_support_) continue;
            const Bitmap& item = items_[frequent_[next]];
            bool nonzero = false;
            for (std::size_t w = 0; w < candidate.size(); ++w) {
                candidate[w] = window[w] & item[w];
                nonzero |= candidate[w] != 0;
            }
            if (!nonzero) continue;
            const Counts c = count(candidate);
            if (c.total < min_support_) continue;
            prefix.push_back(frequent_[next]);
            grow(prefix, next, candidate, c);
            prefix.pop_back();
        }
    }

    void emit(const std::vector<Symbol>& prefix, const Counts& counts) {
        Pattern p;
        p.labels.reserve(prefix.size());
        for (Symbol s : prefix) p.labels.push_back(db_.alphabet[s]);
        p.support_total = counts.total;
        if (grouped_) {
            p.support_hp = counts.hp;
            p.support_lp = counts.lp;
        }
        out_.push_back(std::move(p));
    }

    const SequenceDatabase& db_;
    const MiningParams& params_;
    std::size_t delta_;
    std::size_t min_support_;
    bool grouped_;
    Layout layout_;
    std::vector<Bitmap> items_;
    std::vector<Counts> item_counts_;
    std::vector<Symbol> frequent_;
    std::map<Symbol, std::size_t> frequent_index_;
    std::vector<std::size_t> cmap_;
    std::vector<Pattern> out_;
};

}  // namespace

std::vector<Pattern> mine(const SequenceDatabase& db, const MiningParams& params) {
    params.validate();
    if (db.size() == 0) return {};
    return BitmapMiner(db, params).run();
}

// ---------------------------------------------------------------------------
// Post-processing and I/O
// ---------------------------------------------------------------------------

std::vector<Pattern> filter_by_support_diff(std::span<const Pattern> patterns, long threshold) {
    std::vector<Pattern> out;
    for (const auto& p : patterns) {
        if (std::labs(p.support_diff()) >= threshold) out.push_back(p);
    }
    return out;
}

std::vector<Pattern> closed_patterns(std::span<const Pattern> patterns) {
    auto contained = [](const std::vector<std::string>& inner, const std::vector<std::string>& outer) {
        return std::search(outer.begin(), outer.end(), inner.begin(), inner.end()) != outer.end();
    };
    std::vector<Pattern> out;
    for (const auto& p : patterns) {
        const bool absorbed = std::any_of(patterns.begin(), patterns.end(), [&](const Pattern& q) {
            return q.labels.size() > p.labels.size() && q.support_total == p.support_total &&
                   q.support_hp == p.support_hp && contained(p.labels, q.labels);
        });
        if (!absorbed) out.push_back(p);
    }
    return out;
}

std::vector<std::string> split_pattern_text(std::string_view text) {
    static constexpr std::string_view kSep = " → ";
    std::vector<std::string> labels;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(kSep, start);
        labels.emplace_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + kSep.size();
    }
    return labels;
}

void write_patterns_csv(std::ostream& out, std::span<const Pattern> patterns) {
    csv::Writer w(out);
    w.row({"pattern", "len", "sup_total", "sup_hp", "sup_lp", "sup_diff"});
    for (const auto& p : patterns) {
        if (p.grouped()) {
            w.row({p.text(), std::to_string(p.labels.size()), std::to_string(p.support_total),
                   std::to_string(*p.support_hp), std::to_string(*p.support_lp), std::to_string(p.support_diff())});
        } else {
            w.row({p.text(), std::to_string(p.labels.size()), std::to_string(p.support_total), "", "", ""});
        }
    }
}

std::vector<Pattern> parse_patterns_csv(std::istream& in) {
    const auto table = csv::read(in);
    const auto c_pattern = table.column("pattern");
    const auto c_len = table.column("len");
    const auto c_total = table.column("sup_total");
    const auto c_hp = table.column("sup_hp");
    const auto c_lp = table.column("sup_lp");
    const auto c_diff = table.column("sup_diff");

    auto number = [](const std::string& text, std::size_t line) -> long {
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != text.size()) {
            throw MiningError("line " + std::to_string(line) + ": invalid integer '" + text + "'");
        }
        return v;
    };

    std::vector<Pattern> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        Pattern p;
        p.labels = split_pattern_text(row[c_pattern]);
        if (number(row[c_len], line) != static_cast<long>(p.labels.size())) {
            throw MiningError("line " + std::to_string(line) + ": len does not match pattern");
        }
        p.support_total = static_cast<std::size_t>(number(row[c_total], line));
        if (!row[c_hp].empty() || !row[c_lp].empty()) {
            p.support_hp = static_cast<std::size_t>(number(row[c_hp], line));
            p.support_lp = static_cast<std::size_t>(number(row[c_lp], line));
            if (*p.support_hp + *p.support_lp != p.support_total) {
                throw MiningError("line " + std::to_string(line) + ": sup_hp + sup_lp != sup_total");
            }
            if (!row[c_diff].empty() && number(row[c_diff], line) != p.support_diff()) {
                throw MiningError("line " + std::to_string(line) + ": sup_diff inconsistent");
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_patterns_markdown(std::ostream& out, std::span<const Pattern> patterns) {
    out << "| # | Pattern | Len | SUP | HP SUP | LP SUP | SUP DIFF |\n";
    out << "|---:|---|---:|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const auto& p = patterns[i];
        if (p.grouped()) {
            out << fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", i + 1, p.text(), p.labels.size(),
                               p.support_total, *p.support_hp, *p.support_lp, p.support_diff());
        } else {
            out << fmt::format("| {} | {} | {} | {} |  |  |  |\n", i + 1, p.text(), p.labels.size(), p.support_total);
        }
    }
}

}  // namespace seqlab
