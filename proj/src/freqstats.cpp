#include "seqlab/freqstats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "seqlab/csv.hpp"

namespace seqlab {

namespace {

double percent(std::size_t n, std::size_t total) {
    return total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0;
}

FrequencyTable finish(std::array<std::size_t, DALabel::kCount> hp, std::array<std::size_t, DALabel::kCount> lp) {
    FrequencyTable table;
    for (std::size_t i = 0; i < DALabel::kCount; ++i) {
        if (hp[i] + lp[i] == 0) continue;
        FrequencyRow row;
        row.label = DALabel::from_index(i);
        row.n_hp = hp[i];
        row.n_lp = lp[i];
        row.n_total = hp[i] + lp[i];
        table.rows.push_back(row);
        table.total_hp += hp[i];
        table.total_lp += lp[i];
    }
    table.total = table.total_hp + table.total_lp;
    for (auto& row : table.rows) {
        row.pct_total = percent(row.n_total, table.total);
        row.pct_hp = percent(row.n_hp, table.total_hp);
        row.pct_lp = percent(row.n_lp, table.total_lp);
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const FrequencyRow& a, const FrequencyRow& b) {
        if (a.n_total != b.n_total) return a.n_total > b.n_total;
        return a.label.str() < b.label.str();
    });
    return table;
}

void check_tests(const FrequencyTable& table, std::span<const TestResult> tests) {
    if (!tests.empty() && tests.size() != table.rows.size()) {
        throw StatsError("test results do not match frequency table rows");
    }
}

}  // namespace

FrequencyTable frequency_table(const Corpus& corpus, const GroupAssignment& groups) {
    std::array<std::size_t, DALabel::kCount> hp{}, lp{};
    for (const auto& session : corpus.sessions) {
        auto g = groups.session_group(session.session_id);
        if (!g) throw StatsError("session " + session.session_id + " has no group");
        auto& counts = *g == Group::HP ? hp : lp;
        for (const auto& turn : session.turns) {
            for (DACode c : turn.codes) ++counts[DALabel{turn.speaker, c}.index()];
        }
    }
    return finish(hp, lp);
}

FrequencyTable frequency_table_from_counts(std::span<const LabelGroupCount> counts) {
    std::array<std::size_t, DALabel::kCount> hp{}, lp{};
    for (const auto& c : counts) {
        hp[c.label.index()] += c.n_hp;
        lp[c.label.index()] += c.n_lp;
    }
    return finish(hp, lp);
}

double chisq1_sf(double x) {
    if (!(x > 0.0)) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

ChiSquareResult chisq_2x2_yates(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2, bool continuity) {
    if (n1 == 0 || n2 == 0) throw StatsError("chi-square: group totals must be positive");
    if (k1 > n1 || k2 > n2) throw StatsError("chi-square: count exceeds group total");

    const std::array<double, 4> observed = {static_cast<double>(k1), static_cast<double>(n1 - k1),
                                            static_cast<double>(k2), static_cast<double>(n2 - k2)};
    const double total = static_cast<double>(n1 + n2);
    const std::array<double, 2> rows = {static_cast<double>(n1), static_cast<double>(n2)};
    const std::array<double, 2> cols = {static_cast<double>(k1 + k2), static_cast<double>(n1 + n2 - k1 - k2)};
    if (cols[0] == 0.0 || cols[1] == 0.0) throw StatsError("chi-square: degenerate table (zero expected cell)");

    double stat = 0.0;
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            const double expected = rows[r] * cols[c] / total;
            double deviation = std::abs(observed[2 * r + c] - expected);
            if (continuity) deviation = std::max(deviation - 0.5, 0.0);
            stat += deviation * deviation / expected;
        }
    }
    return {stat, 1, chisq1_sf(stat)};
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw StatsError("p-value outside [0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const double scaled = static_cast<double>(m - rank) * p_values[order[rank]];
        running = std::max(running, std::min(1.0, scaled));
        adjusted[order[rank]] = running;
    }
    return adjusted;
}

std::vector<TestResult> compare_frequencies(const FrequencyTable& table, const CompareOptions& options) {
    if (table.rows.empty()) throw StatsError("frequency table has no label rows");
    std::vector<TestResult> results;
    std::vector<double> raw;
    for (const auto& row : table.rows) {
        const auto chi = chisq_2x2_yates(row.n_hp, table.total_hp, row.n_lp, table.total_lp, options.continuity);
        results.push_back({row.label.str(), chi.statistic, chi.df, chi.p, chi.p, false});
        raw.push_back(chi.p);
    }
    const auto adjusted = holm_bonferroni(raw);
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].p_adj = adjusted[i];
        results[i].significant = adjusted[i] < options.alpha;
    }
    return results;
}

void write_frequency_csv(std::ostream& out, const FrequencyTable& table, std::span<const TestResult> tests) {
    check_tests(table, tests);
    csv::Writer w(out);
    w.row({"label", "n_total", "pct_total", "n_hp", "pct_hp", "n_lp", "pct_lp", "chi2", "df", "p", "p_adj",
           "significant"});
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        std::vector<std::string> fields = {r.label.str(),
                                           std::to_string(r.n_total),
                                           fmt::format("{:.4f}", r.pct_total),
                                           std::to_string(r.n_hp),
                                           fmt::format("{:.4f}", r.pct_hp),
                                           std::to_string(r.n_lp),
                                           fmt::format("{:.4f}", r.pct_lp)};
        if (tests.empty()) {
            fields.insert(fields.end(), {"", "", "", "", ""});
        } else {
            const auto& t = tests[i];
            fields.insert(fields.end(), {fmt::format("{:.6f}", t.statistic), std::to_string(t.df),
                                         fmt::format("{:.6g}", t.p_raw), fmt::format("{:.6g}", t.p_adj),
                                         t.significant ? "1" : "0"});
        }
        w.row(fields);
    }
    w.row({"SUM", std::to_string(table.total), table.total ? "100.0000" : "0.0000", std::to_string(table.total_hp),
           table.total_hp ? "100.0000" : "0.0000", std::to_string(table.total_lp),
           table.total_lp ? "100.0000" : "0.0000", "", "", "", "", ""});
}

void write_frequency_markdown(std::ostream& out, const FrequencyTable& table, std::span<const TestResult> tests) {
    check_tests(table, tests);
    out << "| DA | Overall n | % | HP n | % | LP n | % | χ²(1) | p | p_adj |\n";
    out << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        out << fmt::format("| {} | {} | {:.1f} | {} | {:.1f} | {} | {:.1f} |", r.label.str(), r.n_total, r.pct_total,
                           r.n_hp, r.pct_hp, r.n_lp, r.pct_lp);
        if (tests.empty()) {
            out << "  |  |  |\n";
        } else {
            const auto& t = tests[i];
            out << fmt::format(" {:.2f} | {:.3f} | {:.3f}{} |\n", t.statistic, t.p_raw, t.p_adj,
                               t.significant ? "*" : "");
        }
    }
    out << fmt::format("| SUM | {} | {} | {} | {} | {} | {} |  |  |  |\n", table.total, table.total ? 100 : 0,
                       table.total_hp, table.total_hp ? 100 : 0, table.total_lp, table.total_lp ? 100 : 0);
}

}  // namespace seqlab
