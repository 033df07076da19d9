#ifndef SEQLAB_TESTKIT_HPP
#define SEQLAB_TESTKIT_HPP

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "seqlab/corpus.hpp"
#include "seqlab/freqstats.hpp"
#include "seqlab/seqmine.hpp"

namespace testkit {

/// Published per-group label counts (HP, LP), 19 labels.
inline std::vector<seqlab::LabelGroupCount> table2_counts() {
    struct Row {
        const char* label;
        std::size_t hp, lp;
    };
    static constexpr Row rows[] = {
        {"[t]Q", 1135, 1051}, {"[s]R", 985, 910}, {"[t]A", 662, 661}, {"[t]S", 163, 168}, {"[t]R", 97, 82},
        {"[t]Cp", 98, 71},    {"[s]S", 45, 83},   {"[s]Q", 75, 35},   {"[s]M", 49, 47},   {"[s]G", 40, 53},
        {"[t]G", 35, 47},     {"[t]Ce", 48, 30},  {"[s]T", 36, 32},   {"[t]Cr", 39, 27},  {"[t]T", 28, 26},
        {"[s]D", 31, 16},     {"[s]A", 11, 8},    {"[t]D", 13, 4},    {"[t]M", 13, 3},
    };
    std::vector<seqlab::LabelGroupCount> out;
    for (const auto& r : rows) out.push_back({*seqlab::parse_label(r.label), r.hp, r.lp});
    return out;
}

/// Chi-square column as printed in the published table.
inline double table2_chisq(const std::string& label) {
    static const std::pair<const char*, double> values[] = {
        {"[t]Q", 0.02}, {"[s]R", 0.03}, {"[t]A", 1.92}, {"[t]S", 0.8},  {"[t]R", 0.33},  {"[t]Cp", 2.42},
        {"[s]S", 13.78}, {"[s]Q", 11.37}, {"[s]M", 0},  {"[s]G", 2.56}, {"[t]G", 2.4},   {"[t]Ce", 2.62},
        {"[s]T", 0},    {"[t]Cr", 1.14}, {"[t]T", 0},  {"[s]D", 3.25}, {"[s]A", 0.09},  {"[t]D", 3.23},
        {"[t]M", 4.45},
    };
    for (const auto& [l, v] : values) {
        if (label == l) return v;
    }
    return -1.0;
}

/// Two sessions (one per group) whose per-label counts equal `counts`, one code per turn.
inline seqlab::Corpus corpus_from_counts(const std::vector<seqlab::LabelGroupCount>& counts) {
    seqlab::Session hp{"HP-S01", "HP01", {}}, lp{"LP-S01", "LP01", {}};
    for (const auto& c : counts) {
        for (std::size_t i = 0; i < c.n_hp; ++i) hp.turns.push_back({hp.turns.size(), c.label.role, {c.label.code}});
        for (std::size_t i = 0; i < c.n_lp; ++i) lp.turns.push_back({lp.turns.size(), c.label.role, {c.label.code}});
    }
    return seqlab::make_corpus({hp, lp});
}

/// Random labelled sequences over a small alphabet, with learners and groups attached.
struct RandomDbSpec {
    std::size_t max_sessions = 20;
    std::size_t max_events = 60;
    std::size_t max_alphabet = 10;
};

inline seqlab::SequenceDatabase random_database(std::mt19937_64& rng, const RandomDbSpec& spec = {}) {
    std::uniform_int_distribution<std::size_t> n_sessions(1, spec.max_sessions);
    std::uniform_int_distribution<std::size_t> n_alpha(1, spec.max_alphabet);
    const std::size_t sessions = n_sessions(rng);
    const std::size_t alpha = n_alpha(rng);
    // Skewed symbol weights so that frequent long patterns exist.
    std::vector<double> weights;
    for (std::size_t i = 0; i < alpha; ++i) weights.push_back(1.0 / static_cast<double>(i + 1));
    std::discrete_distribution<std::size_t> symbol(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> length(0, spec.max_events);

    std::vector<std::vector<std::string>> raw;
    for (std::size_t s = 0; s < sessions; ++s) {
        std::vector<std::string> seq(length(rng));
        for (auto& e : seq) e = "e" + std::to_string(symbol(rng));
        raw.push_back(std::move(seq));
    }
    auto db = seqlab::make_database(raw);
    for (std::size_t s = 0; s < db.size(); ++s) {
        db.learner_ids[s] = "L" + std::to_string(s % 4);
        db.groups[s] = (s % 4) < 2 ? seqlab::Group::HP : seqlab::Group::LP;
    }
    return db;
}

inline seqlab::MiningParams random_params(std::mt19937_64& rng, std::size_t n_sequences) {
    seqlab::MiningParams p;
    p.min_len = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    p.max_len = p.min_len + std::uniform_int_distribution<std::size_t>(0, 2)(rng);
    p.max_gap = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    p.gap_mode = std::bernoulli_distribution(0.25)(rng) ? seqlab::GapMode::Intervening : seqlab::GapMode::PositionDelta;
    if (std::bernoulli_distribution(0.5)(rng)) {
        p.min_support = seqlab::MinSupport::absolute(
            std::uniform_int_distribution<std::size_t>(1, std::max<std::size_t>(1, n_sequences / 2))(rng));
    } else {
        p.min_support = seqlab::MinSupport::fraction(std::uniform_real_distribution<double>(0.05, 0.6)(rng));
    }
    return p;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("seqlab-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace testkit

#endif  // SEQLAB_TESTKIT_HPP
