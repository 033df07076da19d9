#ifndef SEQLAB_PIPELINE_HPP
#define SEQLAB_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqlab/corpus.hpp"
#include "seqlab/freqstats.hpp"
#include "seqlab/permtest.hpp"
#include "seqlab/reliability.hpp"
#include "seqlab/scoring.hpp"
#include "seqlab/seqmine.hpp"
#include "seqlab/synth.hpp"

namespace seqlab::cli {

/// Bad invocation or configuration (exit code 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a pipeline stage (exit code 1).
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

enum class OutputFormat : std::uint8_t { Csv, Markdown, Both };

struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path proficiency;
    std::filesystem::path groups;
    std::filesystem::path annotations;
    std::filesystem::path icc;
    std::filesystem::path patterns;
    std::filesystem::path out_dir = "out";

    MiningParams mining;
    bool closed_only = false;
    long diff_threshold = 10;
    PermutationOptions permutation;  // also carries alpha and the marginal band
    ScoringOptions scoring;
    bool continuity = true;
    KappaScope kappa_scope = KappaScope::Code;
    OutputFormat format = OutputFormat::Both;
};

/// Reads the JSON config document. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// "0.2" style values are fractions of sessions, "14" style values are counts.
MinSupport parse_min_support(std::string_view text);

struct RunAllResult {
    Corpus corpus;
    GroupAssignment groups;
    std::optional<Grouping> grouping;  // present when groups came from scoring
    FrequencyTable table;
    std::vector<TestResult> frequency_tests;
    std::vector<Pattern> mined;
    std::vector<Pattern> filtered;
    std::vector<PermutationResult> permutation;
    std::string report;  // combined Markdown report
};

/// score -> compare-freq -> mine -> filter -> permtest, writing every
/// stage's artifacts plus report.md to config.out_dir.
RunAllResult run_all(const PipelineConfig& config);

/// Entry point of the da-seqlab executable. Returns the process exit code.
int main(int argc, char** argv);

}  // namespace seqlab::cli

#endif  // SEQLAB_PIPELINE_HPP
