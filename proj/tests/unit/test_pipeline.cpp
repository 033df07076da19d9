#include <fstream>

#include <fmt/format.h>

#include "gtest/gtest.h"

#include "seqlab/pipeline.hpp"
#include "testkit.hpp"

using namespace seqlab;
using namespace seqlab::cli;

namespace {

// Synthetic corpus and groups written to `dir`; returns a config pointing at them.
PipelineConfig synth_config(const testkit::TempDir& dir, std::uint64_t seed, double hp, double lp) {
    auto spec = default_generator_spec();
    spec.seed = seed;
    spec.planted = PlantedPattern{{*parse_label("[t]Q"), *parse_label("[s]R"), *parse_label("[t]Cp")}, hp, lp};
    const auto data = generate(spec);
    {
        std::ofstream out(dir / "corpus.jsonl");
        write_corpus(out, data.corpus);
        std::ofstream groups(dir / "groups.csv");
        write_groups_csv(groups, data.groups.learners);
    }
    PipelineConfig cfg;
    cfg.corpus = dir / "corpus.jsonl";
    cfg.groups = dir / "groups.csv";
    cfg.out_dir = dir / "out";
    return cfg;
}

}  // namespace

TEST(Config, ParsesAllSections) {
    const auto cfg = parse_config(R"({
        "corpus": "data/c.jsonl", "groups": "/abs/g.csv", "out": "res",
        "mining": {"min_len": 2, "max_len": 3, "max_gap": 2, "min_support": 14, "gap_mode": "intervening", "closed_only": true},
        "diff_threshold": 8,
        "permutation": {"mode": "mc", "n": 500, "seed": 42, "exact_cap": 10, "statistic": "proportion"},
        "alpha": 0.01, "marginal": 0.2,
        "scoring": {"standardization": "pooled", "orientation": {"lex_acc": 1}},
        "continuity": false, "kappa_scope": "label", "format": "csv"
    })",
                                  "/base");
    EXPECT_EQ(cfg.corpus, std::filesystem::path("/base/data/c.jsonl"));
    EXPECT_EQ(cfg.groups, std::filesystem::path("/abs/g.csv"));
    EXPECT_EQ(cfg.out_dir, std::filesystem::path("/base/res"));
    EXPECT_EQ(cfg.mining.max_len, 3u);
    EXPECT_EQ(cfg.mining.max_gap, 2u);
    EXPECT_FALSE(cfg.mining.min_support.is_fraction());
    EXPECT_EQ(cfg.mining.min_support.resolve(70), 14u);
    EXPECT_EQ(cfg.mining.gap_mode, GapMode::Intervening);
    EXPECT_TRUE(cfg.closed_only);
    EXPECT_EQ(cfg.diff_threshold, 8);
    EXPECT_EQ(cfg.permutation.mode, ModeRequest::MonteCarlo);
    EXPECT_EQ(cfg.permutation.n_permutations, 500u);
    EXPECT_EQ(cfg.permutation.seed, 42u);
    EXPECT_EQ(cfg.permutation.statistic, Statistic::ProportionDifference);
    EXPECT_DOUBLE_EQ(cfg.permutation.alpha, 0.01);
    EXPECT_EQ(cfg.scoring.standardization, Standardization::Pooled);
    EXPECT_EQ(cfg.scoring.orientation[static_cast<std::size_t>(Indicator::LexicalAccuracy)], 1);
    EXPECT_FALSE(cfg.continuity);
    EXPECT_EQ(cfg.kappa_scope, KappaScope::Label);
    EXPECT_EQ(cfg.format, OutputFormat::Csv);
}

TEST(Config, Defaults) {
    const auto cfg = parse_config("{}");
    EXPECT_EQ(cfg.mining.min_len, 2u);
    EXPECT_EQ(cfg.mining.max_len, 4u);
    EXPECT_EQ(cfg.mining.max_gap, 1u);
    EXPECT_EQ(cfg.mining.min_support.resolve(70), 14u);
    EXPECT_EQ(cfg.diff_threshold, 10);
    EXPECT_EQ(cfg.permutation.mode, ModeRequest::Auto);
    EXPECT_DOUBLE_EQ(cfg.permutation.alpha, 0.05);
    EXPECT_DOUBLE_EQ(cfg.permutation.marginal, 0.10);
}

TEST(Config, RejectsBadValues) {
    EXPECT_THROW(parse_config("{"), UsageError);
    EXPECT_THROW(parse_config("[]"), UsageError);
    EXPECT_THROW(parse_config(R"({"mining": {"max_gap": 0}})"), UsageError);
    EXPECT_THROW(parse_config(R"({"mining": {"min_support": 1.5}})"), UsageError);
    EXPECT_THROW(parse_config(R"({"permutation": {"mode": "fast"}})"), UsageError);
    EXPECT_THROW(parse_config(R"({"format": "xml"})"), UsageError);
    EXPECT_THROW(parse_config(R"({"scoring": {"orientation": {"nope": 1}}})"), UsageError);
    EXPECT_THROW(parse_config(R"({"diff_threshold": "ten"})"), UsageError);
}

TEST(Config, MinSupportText) {
    EXPECT_TRUE(parse_min_support("0.2").is_fraction());
    EXPECT_EQ(parse_min_support("0.2").resolve(70), 14u);
    EXPECT_FALSE(parse_min_support("14").is_fraction());
    EXPECT_THROW(parse_min_support("0"), UsageError);
    EXPECT_THROW(parse_min_support("abc"), UsageError);
    EXPECT_THROW(parse_min_support("2.5"), UsageError);
}

TEST(RunAll, FindsPlantedPattern) {
    testkit::TempDir dir("runall");
    const auto cfg = synth_config(dir, 1, 0.9, 0.1);
    const auto result = run_all(cfg);
    const std::vector<std::string> planted = {"[t]Q", "[s]R", "[t]Cp"};
    bool found = false;
    for (const auto& r : result.permutation) {
        if (r.pattern == planted) {
            found = true;
            EXPECT_LT(r.p_adj, 0.05);
        }
    }
    EXPECT_TRUE(found);
    EXPECT_NE(result.report.find("[t]Q → [s]R → [t]Cp"), std::string::npos);
    for (const char* f : {"report.md", "frequencies.csv", "frequencies.md", "patterns.csv", "filtered.csv",
                          "permtest.csv", "permtest.md", "summary.csv", "label_counts.csv"}) {
        EXPECT_TRUE(std::filesystem::exists(cfg.out_dir / f)) << f;
    }
}

TEST(RunAll, DeterministicArtifacts) {
    testkit::TempDir dir("determinism");
    auto cfg = synth_config(dir, 2, 0.9, 0.1);
    run_all(cfg);
    const auto first = cfg.out_dir;
    cfg.out_dir = dir / "again";
    run_all(cfg);
    for (const auto& entry : std::filesystem::directory_iterator(first)) {
        EXPECT_EQ(testkit::slurp(entry.path()), testkit::slurp(cfg.out_dir / entry.path().filename()))
            << entry.path().filename();
    }
}

TEST(RunAll, NoPatternsPassFilter) {
    testkit::TempDir dir("nofilter");
    auto cfg = synth_config(dir, 3, 0.0, 0.0);
    cfg.diff_threshold = 1000;
    const auto result = run_all(cfg);
    EXPECT_TRUE(result.filtered.empty());
    EXPECT_TRUE(result.permutation.empty());
    EXPECT_NE(result.report.find("nothing to test"), std::string::npos);
}

TEST(RunAll, ScoresFromProficiency) {
    testkit::TempDir dir("scored");
    auto cfg = synth_config(dir, 4, 0.9, 0.1);
    auto write_prof = [&](bool constant_column) {
        std::ofstream prof(dir / "prof.csv");
        prof << "learner_id,timepoint,lex_cx,gram_cx,lex_acc,gram_acc,speed_flu,bdr_flu\n";
        for (int l = 1; l <= 12; ++l) {
            const double base = 10.0 + (l * 7 % 5), gain = 13.0 - l;
            const double gram_acc = constant_column ? 0.2 : 0.2 + 0.01 * (l % 4);
            prof << fmt::format("L{:02},pre,{},{},{},{},{},{}\n", l, base, base + 1, 0.3 + 0.01 * (l % 3), gram_acc,
                                base * 3, 5 - l % 4);
            prof << fmt::format("L{:02},post,{},{},{},{},{},{}\n", l, base + gain, base + 1 + gain,
                                0.3 - 0.01 * gain, gram_acc, base * 3 + gain, 5 - l % 4);
        }
    };
    write_prof(false);
    cfg.groups.clear();
    cfg.proficiency = dir / "prof.csv";
    const auto result = run_all(cfg);
    ASSERT_TRUE(result.grouping.has_value());
    EXPECT_EQ(result.grouping->gains.size(), 12u);
    std::size_t hp = 0;
    for (const auto& [l, g] : result.groups.learners) hp += g == Group::HP;
    EXPECT_EQ(hp, 6u);
    EXPECT_EQ(result.groups.sessions.size(), 72u);
    EXPECT_TRUE(std::filesystem::exists(cfg.out_dir / "gains.csv"));
    EXPECT_TRUE(std::filesystem::exists(cfg.out_dir / "composites.csv"));

    // a constant indicator within a timepoint cannot be standardized
    write_prof(true);
    EXPECT_THROW(run_all(cfg), StageError);
}
