#ifndef SEQLAB_FREQSTATS_HPP
#define SEQLAB_FREQSTATS_HPP

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlab/corpus.hpp"
#include "seqlab/scoring.hpp"

namespace seqlab {

class StatsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FrequencyRow {
    DALabel label;
    std::size_t n_total = 0;
    std::size_t n_hp = 0;
    std::size_t n_lp = 0;
    double pct_total = 0.0;  // percent of all events in that column
    double pct_hp = 0.0;
    double pct_lp = 0.0;
};

struct FrequencyTable {
    std::vector<FrequencyRow> rows;  // descending n_total, ties by label text
    std::size_t total = 0;
    std::size_t total_hp = 0;
    std::size_t total_lp = 0;
};

/// Counts every flattened DA event per label and group.
FrequencyTable frequency_table(const Corpus& corpus, const GroupAssignment& groups);

struct LabelGroupCount {
    DALabel label;
    std::size_t n_hp;
    std::size_t n_lp;
};

/// Builds a table from pre-aggregated counts (e.g. a published table).
FrequencyTable frequency_table_from_counts(std::span<const LabelGroupCount> counts);

struct ChiSquareResult {
    double statistic = 0.0;
    int df = 1;
    double p = 1.0;
};

/// Upper tail of the chi-square distribution with one degree of freedom.
double chisq1_sf(double x);

/// Chi-square test on [k1, n1-k1; k2, n2-k2]. With continuity correction each
/// cell contributes max(|O-E| - 0.5, 0)^2 / E.
ChiSquareResult chisq_2x2_yates(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2,
                                bool continuity = true);

/// Holm step-down adjusted p-values, returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> p_values);

struct TestResult {
    std::string key;
    double statistic = 0.0;
    int df = 1;
    double p_raw = 1.0;
    double p_adj = 1.0;
    bool significant = false;
};

struct CompareOptions {
    bool continuity = true;
    double alpha = 0.05;
};

/// One label-vs-rest chi-square per row; the Holm family is all rows.
std::vector<TestResult> compare_frequencies(const FrequencyTable& table, const CompareOptions& options = {});

/// Columns: label,n_total,pct_total,n_hp,pct_hp,n_lp,pct_lp,chi2,df,p,p_adj,significant
/// plus a closing SUM row. `tests` may be empty or must match the table rows.
void write_frequency_csv(std::ostream& out, const FrequencyTable& table, std::span<const TestResult> tests);
void write_frequency_markdown(std::ostream& out, const FrequencyTable& table, std::span<const TestResult> tests);

}  // namespace seqlab

#endif  // SEQLAB_FREQSTATS_HPP
