#include "seqlab/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "seqlab/csv.hpp"

namespace seqlab {

namespace {

constexpr std::array<std::string_view, kNumIndicators> kColumns = {
    "lex_cx", "gram_cx", "lex_acc", "gram_acc", "speed_flu", "bdr_flu"};

double parse_number(const std::string& text, std::size_t line) {
    std::size_t used = 0;
    double value;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(value)) {
        throw ScoringError("line " + std::to_string(line) + ": invalid number '" + text + "'");
    }
    return value;
}

}  // namespace

std::string_view column_name(Indicator indicator) {
    return kColumns[static_cast<std::size_t>(indicator)];
}

std::optional<Indicator> parse_indicator(std::string_view column) {
    for (std::size_t i = 0; i < kNumIndicators; ++i) {
        if (kColumns[i] == column) return static_cast<Indicator>(i);
    }
    return std::nullopt;
}

std::string_view to_string(Timepoint t) {
    return t == Timepoint::Pre ? "pre" : "post";
}

Orientation default_orientation() {
    return {+1, +1, -1, -1, +1, -1};
}

std::vector<double> zscore(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw ScoringError("z-score needs at least 2 values");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) throw ScoringError("zero variance");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw ScoringError("zero variance");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

std::vector<CompositeScore> composite_scores(std::span<const ProficiencyRecord> records,
                                             const ScoringOptions& options) {
    for (int sign : options.orientation) {
        if (sign != 1 && sign != -1) throw ScoringError("orientation entries must be +1 or -1");
    }

    // learner -> [pre, post] record index
    std::map<std::string, std::array<std::optional<std::size_t>, 2>> by_learner;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        for (double v : r.indicators) {
            if (!std::isfinite(v)) throw ScoringError("non-finite indicator for learner " + r.learner_id);
        }
        auto& slot = by_learner[r.learner_id][static_cast<std::size_t>(r.timepoint)];
        if (slot) {
            throw ScoringError("duplicate " + std::string(to_string(r.timepoint)) + " record for learner " +
                               r.learner_id);
        }
        slot = i;
    }
    for (const auto& [learner, slots] : by_learner) {
        for (std::size_t t = 0; t < 2; ++t) {
            if (!slots[t]) {
                throw ScoringError("learner " + learner + " is missing a " +
                                   std::string(to_string(static_cast<Timepoint>(t))) + " record");
            }
        }
    }
    if (by_learner.size() < 2) throw ScoringError("composite scores need at least 2 learners");

    // Output order: learners ascending, pre then post.
    std::vector<std::size_t> order;
    for (const auto& [learner, slots] : by_learner) {
        order.push_back(*slots[0]);
        order.push_back(*slots[1]);
    }

    std::vector<CompositeScore> out(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        out[k].learner_id = records[order[k]].learner_id;
        out[k].timepoint = records[order[k]].timepoint;
    }

    // Groups of output positions standardized together.
    std::vector<std::vector<std::size_t>> populations;
    if (options.standardization == Standardization::WithinTimepoint) {
        populations.resize(2);
        for (std::size_t k = 0; k < order.size(); ++k) populations[k % 2].push_back(k);
    } else {
        populations.emplace_back(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) populations[0][k] = k;
    }

    for (std::size_t ind = 0; ind < kNumIndicators; ++ind) {
        for (const auto& population : populations) {
            std::vector<double> raw;
            raw.reserve(population.size());
            for (std::size_t k : population) raw.push_back(records[order[k]].indicators[ind]);
            std::vector<double> z;
            try {
                z = zscore(raw);
            } catch (const ScoringError& e) {
                throw ScoringError(std::string(e.what()) + " in indicator " +
                                   std::string(column_name(static_cast<Indicator>(ind))));
            }
            for (std::size_t j = 0; j < population.size(); ++j) {
                out[population[j]].z[ind] = options.orientation[ind] * z[j];
            }
        }
    }
    for (auto& score : out) {
        double sum = 0.0;
        for (double z : score.z) sum += z;
        score.composite = sum / static_cast<double>(kNumIndicators);
    }
    return out;
}

std::string_view to_string(Group g) {
    return g == Group::HP ? "HP" : "LP";
}

std::optional<Group> parse_group(std::string_view text) {
    if (text == "HP") return Group::HP;
    if (text == "LP") return Group::LP;
    return std::nullopt;
}

std::optional<Group> GroupAssignment::learner_group(const std::string& learner_id) const {
    auto it = learners.find(learner_id);
    if (it == learners.end()) return std::nullopt;
    return it->second;
}

std::optional<Group> GroupAssignment::session_group(const std::string& session_id) const {
    auto it = sessions.find(session_id);
    if (it == sessions.end()) return std::nullopt;
    return it->second;
}

Grouping gains_and_groups(std::span<const CompositeScore> scores, const Corpus* corpus) {
    std::map<std::string, std::array<std::optional<double>, 2>> by_learner;
    for (const auto& s : scores) {
        auto& slot = by_learner[s.learner_id][static_cast<std::size_t>(s.timepoint)];
        if (slot) throw ScoringError("duplicate composite for learner " + s.learner_id);
        slot = s.composite;
    }

    Grouping result;
    for (const auto& [learner, slots] : by_learner) {
        if (!slots[0] || !slots[1]) throw ScoringError("missing pre or post composite for learner " + learner);
        result.gains.push_back({learner, *slots[0], *slots[1], *slots[1] - *slots[0]});
    }
    std::stable_sort(result.gains.begin(), result.gains.end(), [](const GainRecord& a, const GainRecord& b) {
        if (a.gain != b.gain) return a.gain > b.gain;
        return a.learner_id < b.learner_id;
    });

    const std::size_t n = result.gains.size();
    const std::size_t n_hp = n / 2;
    if (n % 2 == 1) {
        result.warnings.push_back("odd number of learners (" + std::to_string(n) + "); extra learner assigned to LP");
    }
    if (n_hp > 0 && n_hp < n && result.gains[n_hp - 1].gain == result.gains[n_hp].gain) {
        result.warnings.push_back("gain tie at the median split (" + result.gains[n_hp - 1].learner_id + ", " +
                                  result.gains[n_hp].learner_id + "); broken by learner_id");
    }
    for (std::size_t i = 0; i < n; ++i) {
        result.assignment.learners[result.gains[i].learner_id] = i < n_hp ? Group::HP : Group::LP;
    }
    if (corpus) attach_sessions(result.assignment, *corpus);
    return result;
}

void attach_sessions(GroupAssignment& assignment, const Corpus& corpus) {
    assignment.sessions.clear();
    for (const auto& s : corpus.sessions) {
        auto g = assignment.learner_group(s.learner_id);
        if (!g) throw ScoringError("session " + s.session_id + ": learner " + s.learner_id + " has no group");
        assignment.sessions[s.session_id] = *g;
    }
}

std::vector<ProficiencyRecord> parse_proficiency_csv(std::istream& in) {
    const auto table = csv::read(in);
    const std::size_t c_learner = table.column("learner_id");
    const std::size_t c_time = table.column("timepoint");
    std::array<std::size_t, kNumIndicators> c_ind{};
    for (std::size_t i = 0; i < kNumIndicators; ++i) c_ind[i] = table.column(kColumns[i]);

    std::vector<ProficiencyRecord> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        ProficiencyRecord rec;
        rec.learner_id = row[c_learner];
        if (rec.learner_id.empty()) throw ScoringError("line " + std::to_string(line) + ": empty learner_id");
        if (row[c_time] == "pre") {
            rec.timepoint = Timepoint::Pre;
        } else if (row[c_time] == "post") {
            rec.timepoint = Timepoint::Post;
        } else {
            throw ScoringError("line " + std::to_string(line) + ": timepoint must be pre or post");
        }
        for (std::size_t i = 0; i < kNumIndicators; ++i) rec.indicators[i] = parse_number(row[c_ind[i]], line);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ProficiencyRecord> load_proficiency(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScoringError("cannot open proficiency file '" + path.string() + "'");
    return parse_proficiency_csv(in);
}

std::map<std::string, Group> parse_groups_csv(std::istream& in) {
    const auto table = csv::read(in);
    const std::size_t c_learner = table.column("learner_id");
    const std::size_t c_group = table.column("group");
    std::map<std::string, Group> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto line = std::to_string(table.line_numbers[r]);
        auto g = parse_group(table.rows[r][c_group]);
        if (!g) throw ScoringError("line " + line + ": group must be HP or LP");
        if (!out.emplace(table.rows[r][c_learner], *g).second) {
            throw ScoringError("line " + line + ": duplicate learner " + table.rows[r][c_learner]);
        }
    }
    return out;
}

void write_groups_csv(std::ostream& out, const std::map<std::string, Group>& groups) {
    csv::Writer w(out);
    w.row({"learner_id", "group"});
    for (const auto& [learner, g] : groups) w.row({learner, std::string(to_string(g))});
}

}  // namespace seqlab
