#include "seqlab/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqlab/csv.hpp"

namespace seqlab::cli {

namespace {

using json = nlohmann::json;

constexpr const char* kSeedEnv = "DA_SEQLAB_SEED";

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

template <typename T>
T get_as(const json& value, const std::string& key) {
    try {
        return value.get<T>();
    } catch (const json::exception&) {
        throw UsageError("config: '" + key + "' has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    if (p.is_relative() && !base.empty()) p = base / p;
    return p;
}

GapMode parse_gap_mode(const std::string& text) {
    if (text == "delta") return GapMode::PositionDelta;
    if (text == "intervening") return GapMode::Intervening;
    throw UsageError("gap mode must be 'delta' or 'intervening'");
}

ModeRequest parse_perm_mode(const std::string& text) {
    if (text == "auto") return ModeRequest::Auto;
    if (text == "exact") return ModeRequest::Exact;
    if (text == "mc") return ModeRequest::MonteCarlo;
    throw UsageError("permutation mode must be exact, mc or auto");
}

OutputFormat parse_format(const std::string& text) {
    if (text == "csv") return OutputFormat::Csv;
    if (text == "md") return OutputFormat::Markdown;
    if (text == "both") return OutputFormat::Both;
    throw UsageError("format must be csv, md or both");
}

MinSupport min_support_from_json(const json& v) {
    try {
        if (v.is_number_unsigned() || v.is_number_integer()) {
            const auto n = v.get<long long>();
            if (n < 1) throw UsageError("config: min_support must be positive");
            return MinSupport::absolute(static_cast<std::size_t>(n));
        }
        if (v.is_number_float()) return MinSupport::fraction(v.get<double>());
    } catch (const MiningError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    throw UsageError("config: min_support must be a number");
}

void warn_unknown(const json& object, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [key, value] : object.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            std::cerr << "warning: config" << where << ": ignoring unknown key '" << key << "'\n";
        }
    }
}

PipelineConfig parse_config_impl(std::string_view text, const std::filesystem::path& base, bool& has_seed) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config parse failure: ") + e.what());
    }
    if (!doc.is_object()) throw UsageError("config must be a JSON object");
    warn_unknown(doc,
                 {"corpus", "proficiency", "groups", "annotations", "icc", "patterns", "out", "mining",
                  "diff_threshold", "permutation", "alpha", "marginal", "scoring", "continuity", "kappa_scope",
                  "format"},
                 "");

    PipelineConfig cfg;
    const std::pair<const char*, std::filesystem::path PipelineConfig::*> paths[] = {
        {"corpus", &PipelineConfig::corpus},           {"proficiency", &PipelineConfig::proficiency},
        {"groups", &PipelineConfig::groups},           {"annotations", &PipelineConfig::annotations},
        {"icc", &PipelineConfig::icc},                 {"patterns", &PipelineConfig::patterns},
        {"out", &PipelineConfig::out_dir}};
    for (const auto& [key, member] : paths) {
        if (doc.contains(key)) cfg.*member = resolve(base, get_as<std::string>(doc[key], key));
    }

    if (doc.contains("mining")) {
        const json& m = doc["mining"];
        if (!m.is_object()) throw UsageError("config: 'mining' must be an object");
        warn_unknown(m, {"min_len", "max_len", "max_gap", "min_support", "gap_mode", "closed_only"}, ".mining");
        if (m.contains("min_len")) cfg.mining.min_len = get_as<std::size_t>(m["min_len"], "mining.min_len");
        if (m.contains("max_len")) cfg.mining.max_len = get_as<std::size_t>(m["max_len"], "mining.max_len");
        if (m.contains("max_gap")) cfg.mining.max_gap = get_as<std::size_t>(m["max_gap"], "mining.max_gap");
        if (m.contains("min_support")) cfg.mining.min_support = min_support_from_json(m["min_support"]);
        if (m.contains("gap_mode")) cfg.mining.gap_mode = parse_gap_mode(get_as<std::string>(m["gap_mode"], "gap_mode"));
        if (m.contains("closed_only")) cfg.closed_only = get_as<bool>(m["closed_only"], "mining.closed_only");
    }
    if (doc.contains("diff_threshold")) cfg.diff_threshold = get_as<long>(doc["diff_threshold"], "diff_threshold");

    auto& perm = cfg.permutation;
    if (doc.contains("permutation")) {
        const json& p = doc["permutation"];
        if (!p.is_object()) throw UsageError("config: 'permutation' must be an object");
        warn_unknown(p, {"mode", "n", "seed", "exact_cap", "statistic"}, ".permutation");
        if (p.contains("mode")) perm.mode = parse_perm_mode(get_as<std::string>(p["mode"], "permutation.mode"));
        if (p.contains("n")) perm.n_permutations = get_as<std::size_t>(p["n"], "permutation.n");
        if (p.contains("seed")) {
            perm.seed = get_as<std::uint64_t>(p["seed"], "permutation.seed");
            has_seed = true;
        }
        if (p.contains("exact_cap")) perm.exact_cap = get_as<std::uint64_t>(p["exact_cap"], "permutation.exact_cap");
        if (p.contains("statistic")) {
            const auto s = get_as<std::string>(p["statistic"], "permutation.statistic");
            if (s == "diff") {
                perm.statistic = Statistic::SupportDifference;
            } else if (s == "proportion") {
                perm.statistic = Statistic::ProportionDifference;
            } else {
                throw UsageError("config: permutation.statistic must be 'diff' or 'proportion'");
            }
        }
    }
    if (doc.contains("alpha")) perm.alpha = get_as<double>(doc["alpha"], "alpha");
    if (doc.contains("marginal")) perm.marginal = get_as<double>(doc["marginal"], "marginal");

    if (doc.contains("scoring")) {
        const json& s = doc["scoring"];
        if (!s.is_object()) throw UsageError("config: 'scoring' must be an object");
        warn_unknown(s, {"standardization", "orientation"}, ".scoring");
        if (s.contains("standardization")) {
            const auto v = get_as<std::string>(s["standardization"], "scoring.standardization");
            if (v == "within") {
                cfg.scoring.standardization = Standardization::WithinTimepoint;
            } else if (v == "pooled") {
                cfg.scoring.standardization = Standardization::Pooled;
            } else {
                throw UsageError("config: scoring.standardization must be 'within' or 'pooled'");
            }
        }
        if (s.contains("orientation")) {
            const json& o = s["orientation"];
            if (!o.is_object()) throw UsageError("config: scoring.orientation must be an object");
            for (const auto& [key, value] : o.items()) {
                auto ind = parse_indicator(key);
                if (!ind) throw UsageError("config: unknown indicator '" + key + "'");
                const int sign = get_as<int>(value, "scoring.orientation." + key);
                if (sign != 1 && sign != -1) throw UsageError("config: orientation values must be 1 or -1");
                cfg.scoring.orientation[static_cast<std::size_t>(*ind)] = sign;
            }
        }
    }
    if (doc.contains("continuity")) cfg.continuity = get_as<bool>(doc["continuity"], "continuity");
    if (doc.contains("kappa_scope")) {
        const auto v = get_as<std::string>(doc["kappa_scope"], "kappa_scope");
        if (v == "code") {
            cfg.kappa_scope = KappaScope::Code;
        } else if (v == "label") {
            cfg.kappa_scope = KappaScope::Label;
        } else {
            throw UsageError("config: kappa_scope must be 'code' or 'label'");
        }
    }
    if (doc.contains("format")) cfg.format = parse_format(get_as<std::string>(doc["format"], "format"));

    try {
        cfg.mining.validate();
    } catch (const MiningError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Artifact output
// ---------------------------------------------------------------------------

class Output {
public:
    Output(std::filesystem::path dir, OutputFormat format) : dir_(std::move(dir)), format_(format) {}

    bool csv() const { return format_ != OutputFormat::Markdown; }
    bool markdown() const { return format_ != OutputFormat::Csv; }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw StageError("output", "cannot write " + path.string());
        body(out);
    }

    void csv(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        if (csv()) write(name, body);
    }
    void markdown(const std::string& name, const std::function<void(std::ostream&)>& body) const {
        if (markdown()) write(name, body);
    }

private:
    std::filesystem::path dir_;
    OutputFormat format_;
};

std::string fixed(double v, int digits) {
    return fmt::format("{:.{}f}", v, digits);
}

// ---------------------------------------------------------------------------
// Stage helpers
// ---------------------------------------------------------------------------

LoadedCorpus read_corpus(const PipelineConfig& cfg) {
    if (cfg.corpus.empty()) throw UsageError("missing --corpus");
    try {
        auto loaded = load_corpus(cfg.corpus);
        for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
        return loaded;
    } catch (const CorpusError& e) {
        throw StageError("load", e.what());
    }
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

std::map<std::string, Group> read_groups_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StageError("groups", "cannot open " + path.string());
    return stage("groups", [&] { return parse_groups_csv(in); });
}

void write_scores(const Output& out, const std::vector<CompositeScore>& scores, const Grouping& grouping) {
    out.csv("composites.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        std::vector<std::string> header = {"learner_id", "timepoint"};
        for (std::size_t i = 0; i < kNumIndicators; ++i) {
            header.push_back("z_" + std::string(column_name(static_cast<Indicator>(i))));
        }
        header.push_back("composite");
        w.row(header);
        for (const auto& s : scores) {
            std::vector<std::string> row = {s.learner_id, std::string(to_string(s.timepoint))};
            for (double z : s.z) row.push_back(fixed(z, 6));
            row.push_back(fixed(s.composite, 6));
            w.row(row);
        }
    });
    out.csv("gains.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        w.row({"learner_id", "pre", "post", "gain", "group"});
        for (const auto& g : grouping.gains) {
            w.row({g.learner_id, fixed(g.pre, 6), fixed(g.post, 6), fixed(g.gain, 6),
                   std::string(to_string(*grouping.assignment.learner_group(g.learner_id)))});
        }
    });
    out.csv("groups.csv", [&](std::ostream& os) { write_groups_csv(os, grouping.assignment.learners); });
    out.markdown("scores.md", [&](std::ostream& os) {
        os << "| Learner | Pre | Post | Gain | Group |\n|---|---:|---:|---:|---|\n";
        for (const auto& g : grouping.gains) {
            os << fmt::format("| {} | {:.3f} | {:.3f} | {:.3f} | {} |\n", g.learner_id, g.pre, g.post, g.gain,
                              to_string(*grouping.assignment.learner_group(g.learner_id)));
        }
        for (const auto& w : grouping.warnings) os << "\nWarning: " << w << '\n';
    });
}

Grouping score(const PipelineConfig& cfg, const Corpus* corpus, const Output& out) {
    if (cfg.proficiency.empty()) throw UsageError("missing --proficiency");
    return stage("score", [&] {
        const auto records = load_proficiency(cfg.proficiency);
        const auto scores = composite_scores(records, cfg.scoring);
        auto grouping = gains_and_groups(scores, corpus);
        for (const auto& w : grouping.warnings) std::cerr << "warning: " << w << '\n';
        write_scores(out, scores, grouping);
        return grouping;
    });
}

// Groups from --groups when given, otherwise from scoring the proficiency file.
GroupAssignment resolve_groups(const PipelineConfig& cfg, const Corpus& corpus, const Output& out,
                               std::optional<Grouping>* grouping = nullptr) {
    if (!cfg.groups.empty()) {
        GroupAssignment assignment;
        assignment.learners = read_groups_file(cfg.groups);
        stage("groups", [&] {
            attach_sessions(assignment, corpus);
            return 0;
        });
        return assignment;
    }
    if (!cfg.proficiency.empty()) {
        auto g = score(cfg, &corpus, out);
        auto assignment = g.assignment;
        if (grouping) *grouping = std::move(g);
        return assignment;
    }
    throw UsageError("group assignment needs --groups or --proficiency");
}

std::vector<Pattern> read_patterns(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StageError("patterns", "cannot open " + path.string());
    return stage("patterns", [&] { return parse_patterns_csv(in); });
}

std::string describe_support(const MiningParams& m, std::size_t n_sessions) {
    const std::size_t threshold = m.min_support.resolve(n_sessions);
    if (m.min_support.is_fraction()) {
        return fmt::format("{:g}% of sessions (= {} of {})", m.min_support.value() * 100.0, threshold, n_sessions);
    }
    return fmt::format("{} sessions", threshold);
}

std::vector<Pattern> mine_stage(const PipelineConfig& cfg, const SequenceDatabase& db, const Output& out,
                                const std::string& stem) {
    auto patterns = stage("mine", [&] { return mine(db, cfg.mining); });
    if (cfg.closed_only) patterns = closed_patterns(patterns);
    out.csv(stem + ".csv", [&](std::ostream& os) { write_patterns_csv(os, patterns); });
    out.markdown(stem + ".md", [&](std::ostream& os) { write_patterns_markdown(os, patterns); });
    return patterns;
}

std::vector<Pattern> filter_stage(const PipelineConfig& cfg, const std::vector<Pattern>& patterns, const Output& out) {
    auto filtered = stage("filter", [&] { return filter_by_support_diff(patterns, cfg.diff_threshold); });
    out.csv("filtered.csv", [&](std::ostream& os) { write_patterns_csv(os, filtered); });
    out.markdown("filtered.md", [&](std::ostream& os) { write_patterns_markdown(os, filtered); });
    return filtered;
}

std::string permutation_note(const PipelineConfig& cfg, const ClusterDesign& design,
                             const std::vector<PermutationResult>& results) {
    std::string text;
    if (!results.empty() && results.front().mode == PermutationMode::Exact) {
        text = fmt::format("Exact enumeration over all {} learner relabellings ({} HP / {} LP learners)",
                           results.front().n_permutations, design.n_hp(), design.n_lp());
    } else {
        text = fmt::format("Monte-Carlo learner relabelling, {} draws, seed {}", cfg.permutation.n_permutations,
                           cfg.permutation.seed);
    }
    text += fmt::format("; statistic: {}; two-sided; Holm–Bonferroni family of {}.",
                        cfg.permutation.statistic == Statistic::SupportDifference ? "HP − LP session support"
                                                                                  : "HP − LP support proportion",
                        results.size());
    return text;
}

std::vector<PermutationResult> permtest_stage(const PipelineConfig& cfg, const std::vector<Pattern>& patterns,
                                              const SequenceDatabase& db, const ClusterDesign& design,
                                              const Output& out) {
    PermutationOptions options = cfg.permutation;
    options.max_gap = cfg.mining.max_gap;
    options.gap_mode = cfg.mining.gap_mode;
    auto results = stage("permtest", [&] { return test_pattern_set(patterns, db, design, options); });
    out.csv("permtest.csv", [&](std::ostream& os) { write_permutation_csv(os, results); });
    out.markdown("permtest.md", [&](std::ostream& os) {
        write_permutation_markdown(os, results);
        os << "\n" << permutation_note(cfg, design, results) << "\n";
        os << fmt::format("\nNote. * p_adj < {:g} (Holm–Bonferroni-corrected); † marginal ({:g} ≤ p_adj < {:g}).\n",
                          cfg.permutation.alpha, cfg.permutation.alpha, cfg.permutation.marginal);
    });
    return results;
}

std::pair<FrequencyTable, std::vector<TestResult>> frequency_stage(const PipelineConfig& cfg, const Corpus& corpus,
                                                                   const GroupAssignment& groups, const Output& out) {
    return stage("compare-freq", [&] {
        auto table = frequency_table(corpus, groups);
        auto tests = compare_frequencies(table, {cfg.continuity, cfg.permutation.alpha});
        out.csv("frequencies.csv", [&](std::ostream& os) { write_frequency_csv(os, table, tests); });
        out.markdown("frequencies.md", [&](std::ostream& os) {
            write_frequency_markdown(os, table, tests);
            os << fmt::format("\nNote. * p_adj < {:g} (Holm–Bonferroni-corrected){}.\n", cfg.permutation.alpha,
                              cfg.continuity ? "; Yates continuity correction" : "");
        });
        return std::make_pair(std::move(table), std::move(tests));
    });
}

void write_summary(const Output& out, const CorpusSummary& s, std::size_t removed) {
    const std::string mean = s.mean_turns_per_session ? fixed(*s.mean_turns_per_session, 2) : "NA";
    out.csv("summary.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        w.row({"metric", "value"});
        w.row({"sessions", std::to_string(s.sessions)});
        w.row({"learners", std::to_string(s.learners)});
        w.row({"turns", std::to_string(s.turns)});
        w.row({"mean_turns_per_session", mean});
        w.row({"total_events", std::to_string(s.total_events)});
        w.row({"removed_empty_turns", std::to_string(removed)});
    });
    out.csv("label_counts.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        w.row({"label", "count", "pct"});
        for (const auto& lc : s.label_counts) {
            w.row({lc.label.str(), std::to_string(lc.count),
                   fixed(100.0 * static_cast<double>(lc.count) / static_cast<double>(s.total_events), 4)});
        }
    });
    out.markdown("summary.md", [&](std::ostream& os) {
        os << fmt::format("- Sessions: {}\n- Learners: {}\n- Turns: {} (M = {} turns per session)\n- DA events: {}\n"
                          "- Empty turns removed: {}\n\n",
                          s.sessions, s.learners, s.turns, mean, s.total_events, removed);
        os << "| DA | n | % |\n|---|---:|---:|\n";
        for (const auto& lc : s.label_counts) {
            os << fmt::format("| {} | {} | {:.1f} |\n", lc.label.str(), lc.count,
                              100.0 * static_cast<double>(lc.count) / static_cast<double>(s.total_events));
        }
    });
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_validate(const PipelineConfig& cfg, const Output& out) {
    if (cfg.corpus.empty()) throw UsageError("missing --corpus");
    LoadedCorpus loaded;
    try {
        loaded = load_corpus(cfg.corpus);
    } catch (const CorpusError& e) {
        std::cerr << "validate: " << e.what() << '\n';
        return 1;
    }
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    const auto report = validate_corpus(loaded.corpus);
    auto severity = [](Severity s) { return s == Severity::Error ? "error" : "warning"; };
    out.csv("validation.csv", [&](std::ostream& os) {
        csv::Writer w(os);
        w.row({"severity", "session_id", "turn", "message"});
        for (const auto& i : report.issues) {
            w.row({severity(i.severity), i.session_id, i.turn ? std::to_string(*i.turn) : "", i.message});
        }
    });
    out.markdown("validation.md", [&](std::ostream& os) {
        os << fmt::format("{} error(s), {} warning(s); {} empty turn(s) removed at load.\n", report.error_count(),
                          report.warning_count(), loaded.removed_empty_turns);
        for (const auto& i : report.issues) {
            os << fmt::format("- {}: {}{}: {}\n", severity(i.severity), i.session_id,
                              i.turn ? fmt::format(" turn {}", *i.turn) : "", i.message);
        }
    });
    for (const auto& i : report.issues) {
        std::cerr << severity(i.severity) << ": " << i.session_id << (i.turn ? " turn " + std::to_string(*i.turn) : "")
                  << ": " << i.message << '\n';
    }
    std::cout << fmt::format("{} sessions, {} errors, {} warnings\n", loaded.corpus.sessions.size(),
                             report.error_count(), report.warning_count());
    return report.ok() ? 0 : 1;
}

int cmd_summarize(const PipelineConfig& cfg, const Output& out) {
    const auto loaded = read_corpus(cfg);
    const auto summary = summarize(loaded.corpus);
    write_summary(out, summary, loaded.removed_empty_turns);
    std::cout << fmt::format("{} sessions, {} learners, {} turns, {} DA events\n", summary.sessions, summary.learners,
                             summary.turns, summary.total_events);
    return 0;
}

int cmd_reliability(const PipelineConfig& cfg, const Output& out) {
    if (cfg.annotations.empty() && cfg.icc.empty()) throw UsageError("reliability needs --annotations and/or --icc");
    std::vector<KappaResult> kappas;
    std::optional<ICCResult> icc;
    stage("reliability", [&] {
        if (!cfg.annotations.empty()) kappas = kappa_all(load_annotations(cfg.annotations), cfg.kappa_scope);
        if (!cfg.icc.empty()) {
            std::ifstream in(cfg.icc);
            if (!in) throw ReliabilityError("cannot open " + cfg.icc.string());
            icc = icc_two_way(parse_icc_csv(in));
        }
        return 0;
    });
    if (!cfg.annotations.empty()) {
        out.csv("kappa.csv", [&](std::ostream& os) {
            csv::Writer w(os);
            w.row({"label", "kappa", "p_o", "p_e", "n", "degenerate"});
            for (const auto& k : kappas) {
                w.row({k.label(), fixed(k.kappa, 6), fixed(k.observed_agreement, 6), fixed(k.expected_agreement, 6),
                       std::to_string(k.n), k.degenerate ? "1" : "0"});
            }
        });
    }
    if (icc) {
        out.csv("icc.csv", [&](std::ostream& os) {
            csv::Writer w(os);
            w.row({"model", "icc", "n_subjects", "n_raters", "ms_subjects", "ms_raters", "ms_error", "degenerate"});
            w.row({icc->model, fixed(icc->icc, 6), std::to_string(icc->n_subjects), std::to_string(icc->n_raters),
                   fixed(icc->ms_subjects, 6), fixed(icc->ms_raters, 6), fixed(icc->ms_error, 6),
                   icc->degenerate ? "1" : "0"});
        });
    }
    out.markdown("reliability.md", [&](std::ostream& os) {
        if (!kappas.empty()) {
            os << "| Code | κ | p_o | p_e | n |\n|---|---:|---:|---:|---:|\n";
            for (const auto& k : kappas) {
                os << fmt::format("| {} | {:.2f}{} | {:.3f} | {:.3f} | {} |\n", k.label(), k.kappa,
                                  k.degenerate ? " (constant)" : "", k.observed_agreement, k.expected_agreement, k.n);
            }
        }
        if (icc) {
            os << fmt::format("\n{}: {:.3f} ({} subjects, {} raters)\n", icc->model, icc->icc, icc->n_subjects,
                              icc->n_raters);
        }
    });
    for (const auto& k : kappas) std::cout << fmt::format("{}\tkappa={:.4f}\n", k.label(), k.kappa);
    if (icc) std::cout << fmt::format("ICC(2,1)={:.4f}\n", icc->icc);
    return 0;
}

int cmd_score(const PipelineConfig& cfg, const Output& out) {
    std::optional<LoadedCorpus> loaded;
    if (!cfg.corpus.empty()) loaded = read_corpus(cfg);
    const auto grouping = score(cfg, loaded ? &loaded->corpus : nullptr, out);
    for (const auto& g : grouping.gains) {
        std::cout << fmt::format("{}\t{:.4f}\t{}\n", g.learner_id, g.gain,
                                 to_string(*grouping.assignment.learner_group(g.learner_id)));
    }
    return 0;
}

int cmd_compare_freq(const PipelineConfig& cfg, const Output& out) {
    const auto loaded = read_corpus(cfg);
    const auto groups = resolve_groups(cfg, loaded.corpus, out);
    const auto [table, tests] = frequency_stage(cfg, loaded.corpus, groups, out);
    for (const auto& t : tests) {
        std::cout << fmt::format("{}\tchi2={:.2f}\tp={:.4f}\tp_adj={:.4f}{}\n", t.key, t.statistic, t.p_raw, t.p_adj,
                                 t.significant ? "\t*" : "");
    }
    return 0;
}

int cmd_mine(const PipelineConfig& cfg, const Output& out) {
    const auto loaded = read_corpus(cfg);
    std::optional<GroupAssignment> groups;
    if (!cfg.groups.empty() || !cfg.proficiency.empty()) groups = resolve_groups(cfg, loaded.corpus, out);
    const auto db = stage("mine", [&] { return make_database(loaded.corpus, groups ? &*groups : nullptr); });
    const auto patterns = mine_stage(cfg, db, out, "patterns");
    std::cout << fmt::format("{} frequent patterns (min support {})\n", patterns.size(),
                             describe_support(cfg.mining, db.size()));
    return 0;
}

int cmd_filter(const PipelineConfig& cfg, const Output& out) {
    std::vector<Pattern> patterns;
    if (!cfg.patterns.empty()) {
        patterns = read_patterns(cfg.patterns);
    } else {
        const auto loaded = read_corpus(cfg);
        const auto groups = resolve_groups(cfg, loaded.corpus, out);
        const auto db = stage("mine", [&] { return make_database(loaded.corpus, &groups); });
        patterns = mine_stage(cfg, db, out, "patterns");
    }
    const auto filtered = filter_stage(cfg, patterns, out);
    std::cout << fmt::format("{} of {} patterns pass |HP - LP| >= {}\n", filtered.size(), patterns.size(),
                             cfg.diff_threshold);
    return 0;
}

int cmd_permtest(const PipelineConfig& cfg, const Output& out) {
    const auto loaded = read_corpus(cfg);
    const auto groups = resolve_groups(cfg, loaded.corpus, out);
    const auto db = stage("permtest", [&] { return make_database(loaded.corpus, &groups); });
    std::vector<Pattern> patterns;
    if (!cfg.patterns.empty()) {
        patterns = read_patterns(cfg.patterns);
    } else {
        patterns = filter_stage(cfg, mine_stage(cfg, db, out, "patterns"), out);
    }
    const auto design = stage("permtest", [&] { return ClusterDesign::from_database(db); });
    const auto results = permtest_stage(cfg, patterns, db, design, out);
    for (const auto& r : results) {
        std::cout << fmt::format("{}\tdiff={}\tp={:.4f}\tp_adj={:.4f}\t{}\n", Pattern{r.pattern, 0, {}, {}}.text(),
                                 r.support_diff(), r.p_raw, r.p_adj, r.flag());
    }
    return 0;
}

int cmd_run_all(const PipelineConfig& cfg, const Output& out) {
    const auto result = run_all(cfg);
    std::cout << fmt::format("{} frequent patterns, {} after filtering, {} significant\n", result.mined.size(),
                             result.filtered.size(),
                             std::count_if(result.permutation.begin(), result.permutation.end(),
                                           [](const PermutationResult& r) { return r.significant; }));
    (void)out;
    return 0;
}

std::vector<DALabel> parse_planted(const std::string& text) {
    std::vector<DALabel> labels;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        auto l = parse_label(item);
        if (!l) throw UsageError("--plant: unknown label '" + item + "'");
        labels.push_back(*l);
    }
    return labels;
}

struct Flags {
    std::string config, corpus, out, proficiency, groups, annotations, icc, patterns;
    std::string min_support, perm_mode, format;
    std::uint64_t seed = 0;
    std::size_t max_gap = 0, min_len = 0, max_len = 0, perm_n = 0;
    long diff_threshold = 0;

    std::size_t learners = 12, sessions = 6, turns_min = 60, turns_max = 80;
    std::string plant;
    double rate_hp = 0.0, rate_lp = 0.0, two_code_rate = 0.4;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON pipeline config");
    sub->add_option("--corpus", f.corpus, "Corpus JSON Lines file");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--proficiency", f.proficiency, "Proficiency CSV (pre/post CAF indicators)");
    sub->add_option("--groups", f.groups, "Group CSV (learner_id,group); overrides scoring");
    sub->add_option("--annotations", f.annotations, "Dual-annotation JSON Lines file");
    sub->add_option("--icc", f.icc, "Two-rater CSV (subject,rater_a,rater_b)");
    sub->add_option("--patterns", f.patterns, "Pattern CSV from a previous stage");
    sub->add_option("--seed", f.seed, "Random seed (fallback: $DA_SEQLAB_SEED)");
    sub->add_option("--min-support", f.min_support, "Minimum support: fraction (0.2) or session count (14)");
    sub->add_option("--max-gap", f.max_gap, "Maximum gap between consecutive pattern elements");
    sub->add_option("--min-len", f.min_len, "Minimum pattern length");
    sub->add_option("--max-len", f.max_len, "Maximum pattern length");
    sub->add_option("--diff-threshold", f.diff_threshold, "Support-difference filter threshold");
    sub->add_option("--perm-mode", f.perm_mode, "exact | mc | auto");
    sub->add_option("--perm-n", f.perm_n, "Monte-Carlo permutation count");
    sub->add_option("--format", f.format, "csv | md | both");
}

PipelineConfig build_config(const CLI::App& sub, const Flags& f) {
    bool has_seed = false;
    PipelineConfig cfg;
    if (sub.count("--config")) {
        std::ifstream in(f.config);
        if (!in) throw UsageError("cannot open config " + f.config);
        std::stringstream buffer;
        buffer << in.rdbuf();
        cfg = parse_config_impl(buffer.str(), std::filesystem::path(f.config).parent_path(), has_seed);
    }
    if (!has_seed) {
        if (const char* env = std::getenv(kSeedEnv); env && *env) {
            try {
                std::size_t used = 0;
                cfg.permutation.seed = std::stoull(env, &used);
                if (used != std::string_view(env).size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw UsageError(std::string(kSeedEnv) + " must be an unsigned integer");
            }
        }
    }
    auto given = [&](const char* name) { return sub.count(name) > 0; };
    if (given("--corpus")) cfg.corpus = f.corpus;
    if (given("--out")) cfg.out_dir = f.out;
    if (given("--proficiency")) cfg.proficiency = f.proficiency;
    if (given("--groups")) cfg.groups = f.groups;
    if (given("--annotations")) cfg.annotations = f.annotations;
    if (given("--icc")) cfg.icc = f.icc;
    if (given("--patterns")) cfg.patterns = f.patterns;
    if (given("--seed")) cfg.permutation.seed = f.seed;
    if (given("--min-support")) cfg.mining.min_support = parse_min_support(f.min_support);
    if (given("--max-gap")) cfg.mining.max_gap = f.max_gap;
    if (given("--min-len")) cfg.mining.min_len = f.min_len;
    if (given("--max-len")) cfg.mining.max_len = f.max_len;
    if (given("--diff-threshold")) cfg.diff_threshold = f.diff_threshold;
    if (given("--perm-mode")) cfg.permutation.mode = parse_perm_mode(f.perm_mode);
    if (given("--perm-n")) cfg.permutation.n_permutations = f.perm_n;
    if (given("--format")) cfg.format = parse_format(f.format);
    try {
        cfg.mining.validate();
    } catch (const MiningError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

int cmd_synth(const CLI::App& sub, const Flags& f, const PipelineConfig& cfg) {
    GeneratorSpec spec = default_generator_spec();
    spec.n_learners = f.learners;
    spec.sessions_per_learner = f.sessions;
    spec.turns_min = f.turns_min;
    spec.turns_max = f.turns_max;
    spec.two_code_rate = f.two_code_rate;
    spec.seed = cfg.permutation.seed;
    if (sub.count("--plant")) spec.planted = PlantedPattern{parse_planted(f.plant), f.rate_hp, f.rate_lp};
    const auto data = stage("synth", [&] { return generate(spec); });

    Output out(cfg.out_dir, OutputFormat::Both);
    out.write("corpus.jsonl", [&](std::ostream& os) { write_corpus(os, data.corpus); });
    out.write("groups.csv", [&](std::ostream& os) { write_groups_csv(os, data.groups.learners); });
    out.write("manifest.json", [&](std::ostream& os) { write_manifest(os, data.manifest); });
    std::cout << fmt::format("{} sessions, {} turns, {} injections -> {}\n", data.corpus.sessions.size(),
                             data.corpus.turn_count(), data.manifest.injections.size(), cfg.out_dir.string());
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API
// ---------------------------------------------------------------------------

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    bool has_seed = false;
    return parse_config_impl(text, base_dir, has_seed);
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

MinSupport parse_min_support(std::string_view text) {
    const std::string s(text);
    try {
        std::size_t used = 0;
        if (s.find_first_of(".eE") != std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return MinSupport::fraction(v);
        }
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 1) throw std::invalid_argument(s);
        return MinSupport::absolute(static_cast<std::size_t>(v));
    } catch (const MiningError& e) {
        throw UsageError(std::string("--min-support: ") + e.what());
    } catch (const std::exception&) {
        throw UsageError("--min-support must be a fraction in (0, 1] or a positive session count");
    }
}

RunAllResult run_all(const PipelineConfig& cfg) {
    const Output out(cfg.out_dir, cfg.format);
    RunAllResult r;
    const auto loaded = read_corpus(cfg);
    r.corpus = loaded.corpus;
    const auto summary = summarize(r.corpus);
    write_summary(out, summary, loaded.removed_empty_turns);

    r.groups = resolve_groups(cfg, r.corpus, out, &r.grouping);
    std::tie(r.table, r.frequency_tests) = frequency_stage(cfg, r.corpus, r.groups, out);

    const auto db = stage("mine", [&] { return make_database(r.corpus, &r.groups); });
    r.mined = mine_stage(cfg, db, out, "patterns");
    r.filtered = filter_stage(cfg, r.mined, out);
    std::optional<ClusterDesign> design;
    if (!r.filtered.empty()) {
        design = stage("permtest", [&] { return ClusterDesign::from_database(db); });
        r.permutation = permtest_stage(cfg, r.filtered, db, *design, out);
    }

    // Combined report.
    std::ostringstream md;
    md << "# Dialogue-act sequence analysis\n\n## Corpus\n\n";
    md << fmt::format("- Sessions: {}\n- Learners: {}\n- Turns: {} (M = {} turns per session)\n- DA events: {}\n"
                      "- Empty turns removed: {}\n",
                      summary.sessions, summary.learners, summary.turns,
                      summary.mean_turns_per_session ? fixed(*summary.mean_turns_per_session, 2) : "NA",
                      summary.total_events, loaded.removed_empty_turns);

    md << "\n## Grouping\n\n";
    std::size_t hp_learners = 0, hp_sessions = 0;
    for (const auto& [l, g] : r.groups.learners) hp_learners += g == Group::HP;
    for (const auto& [s, g] : r.groups.sessions) hp_sessions += g == Group::HP;
    md << fmt::format("Source: {}. HP: {} sessions from {} learners; LP: {} sessions from {} learners.\n",
                      r.grouping ? "median split on pre–post composite gain" : "group file", hp_sessions, hp_learners,
                      r.groups.sessions.size() - hp_sessions, r.groups.learners.size() - hp_learners);
    if (r.grouping) {
        md << "\n| Learner | Gain | Group |\n|---|---:|---|\n";
        for (const auto& g : r.grouping->gains) {
            md << fmt::format("| {} | {:.3f} | {} |\n", g.learner_id, g.gain,
                              to_string(*r.groups.learner_group(g.learner_id)));
        }
        for (const auto& w : r.grouping->warnings) md << "\nWarning: " << w << '\n';
    }

    md << "\n## DA frequencies by group\n\n";
    write_frequency_markdown(md, r.table, r.frequency_tests);
    md << fmt::format("\nNote. * p_adj < {:g} (Holm–Bonferroni-corrected){}.\n", cfg.permutation.alpha,
                      cfg.continuity ? "; Yates continuity correction" : "");

    md << "\n## Frequent sequential patterns\n\n";
    md << fmt::format("Length {}–{}, max gap {} ({}), min support {}: {} frequent patterns{}.\n", cfg.mining.min_len,
                      cfg.mining.max_len, cfg.mining.max_gap,
                      cfg.mining.gap_mode == GapMode::PositionDelta ? "position delta" : "intervening events",
                      describe_support(cfg.mining, db.size()), r.mined.size(),
                      cfg.closed_only ? " (closed only)" : "");
    md << fmt::format("Support-difference filter |HP − LP| ≥ {}: {} patterns.\n", cfg.diff_threshold,
                      r.filtered.size());

    md << "\n## Group differences in sequential patterns\n\n";
    if (r.permutation.empty()) {
        md << "No pattern passed the support-difference filter; nothing to test.\n";
    } else {
        write_permutation_markdown(md, r.permutation);
        md << "\n" << permutation_note(cfg, *design, r.permutation) << "\n";
        md << fmt::format("\nNote. SUP DIFF = HP − LP. * p_adj < {:g}; † marginal ({:g} ≤ p_adj < {:g}).\n",
                          cfg.permutation.alpha, cfg.permutation.alpha, cfg.permutation.marginal);
    }
    r.report = md.str();
    out.write("report.md", [&](std::ostream& os) { os << r.report; });
    return r;
}

int main(int argc, char** argv) {
    CLI::App app{"Dialogue-act sequence analysis: frequencies, gap-constrained pattern mining and "
                 "learner-clustered permutation tests",
                 "da-seqlab"};
    app.require_subcommand(1);
    Flags flags;
    const std::pair<const char*, const char*> commands[] = {
        {"validate", "Check a corpus against the coding scheme"},
        {"summarize", "Corpus size and per-label counts"},
        {"reliability", "Per-code Cohen's kappa and two-rater ICC(2,1)"},
        {"score", "CAF composite scores, gains and HP/LP grouping"},
        {"compare-freq", "Per-label chi-square tests with Holm correction"},
        {"mine", "Mine frequent gap-constrained DA patterns"},
        {"filter", "Keep patterns with a large HP/LP support difference"},
        {"permtest", "Learner-clustered permutation tests with Holm correction"},
        {"run-all", "score -> compare-freq -> mine -> filter -> permtest with a combined report"},
        {"synth", "Generate a seeded synthetic corpus"},
    };
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        add_common(sub, flags);
        if (std::string_view(name) == "synth") {
            sub->add_option("--learners", flags.learners, "Number of learners")->capture_default_str();
            sub->add_option("--sessions", flags.sessions, "Sessions per learner")->capture_default_str();
            sub->add_option("--turns-min", flags.turns_min, "Minimum turns per session")->capture_default_str();
            sub->add_option("--turns-max", flags.turns_max, "Maximum turns per session")->capture_default_str();
            sub->add_option("--plant", flags.plant, "Comma-separated labels to plant, e.g. [t]Q,[s]R,[t]Cp");
            sub->add_option("--rate-hp", flags.rate_hp, "Injection probability per HP session");
            sub->add_option("--rate-lp", flags.rate_lp, "Injection probability per LP session");
            sub->add_option("--two-code-rate", flags.two_code_rate, "Probability of a two-code turn")
                ->capture_default_str();
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        const PipelineConfig cfg = build_config(*sub, flags);
        const Output out(cfg.out_dir, cfg.format);
        if (name == "validate") return cmd_validate(cfg, out);
        if (name == "summarize") return cmd_summarize(cfg, out);
        if (name == "reliability") return cmd_reliability(cfg, out);
        if (name == "score") return cmd_score(cfg, out);
        if (name == "compare-freq") return cmd_compare_freq(cfg, out);
        if (name == "mine") return cmd_mine(cfg, out);
        if (name == "filter") return cmd_filter(cfg, out);
        if (name == "permtest") return cmd_permtest(cfg, out);
        if (name == "run-all") return cmd_run_all(cfg, out);
        if (name == "synth") return cmd_synth(*sub, flags, cfg);
    } catch (const UsageError& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return 2;
    } catch (const StageError& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace seqlab::cli
