#include <set>

#include "seqlab/seqmine.hpp"

namespace seqlab {

namespace {

constexpr std::size_t kMaxSequences = 50;
constexpr std::size_t kMaxLength = 200;
constexpr std::size_t kMaxAlphabet = 22;

// Every label path reachable from `pos` by steps of 1..max_delta.
void collect_paths(const std::vector<Symbol>& seq, std::size_t pos, std::size_t max_delta, std::size_t max_len,
                   std::vector<Symbol>& path, std::set<std::vector<Symbol>>& out) {
    path.push_back(seq[pos]);
    out.insert(path);
    if (path.size() < max_len) {
        for (std::size_t next = pos + 1; next < seq.size() && next - pos <= max_delta; ++next) {
            collect_paths(seq, next, max_delta, max_len, path, out);
        }
    }
    path.pop_back();
}

}  // namespace

std::vector<Pattern> brute_force_mine(const SequenceDatabase& db, const MiningParams& params) {
    params.validate();
    if (db.size() > kMaxSequences) throw MiningError("brute_force_mine: too many sequences");
    if (db.alphabet.size() > kMaxAlphabet) throw MiningError("brute_force_mine: alphabet too large");
    for (const auto& seq : db.sequences) {
        if (seq.size() > kMaxLength) throw MiningError("brute_force_mine: sequence too long");
    }

    const std::size_t delta = params.max_delta();
    std::set<std::vector<Symbol>> candidates;
    std::vector<Symbol> path;
    for (const auto& seq : db.sequences) {
        for (std::size_t start = 0; start < seq.size(); ++start) {
            collect_paths(seq, start, delta, params.max_len, path, candidates);
        }
    }

    const bool grouped = db.grouped();
    const std::size_t threshold = params.min_support.resolve(db.size());
    std::vector<Pattern> out;
    for (const auto& candidate : candidates) {
        if (candidate.size() < params.min_len) continue;
        std::size_t total = 0, hp = 0, lp = 0;
        for (std::size_t s = 0; s < db.size(); ++s) {
            if (!occurs(db.sequences[s], candidate, delta)) continue;
            ++total;
            if (grouped) ++(*db.groups[s] == Group::HP ? hp : lp);
        }
        if (total < threshold) continue;
        Pattern p;
        for (Symbol x : candidate) p.labels.push_back(db.alphabet[x]);
        p.support_total = total;
        if (grouped) {
            p.support_hp = hp;
            p.support_lp = lp;
        }
        out.push_back(std::move(p));
    }
    sort_patterns(out);
    return out;
}

}  // namespace seqlab
