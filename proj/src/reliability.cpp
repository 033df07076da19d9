#include "seqlab/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>

#include "json.hpp"
#include "seqlab/csv.hpp"

namespace seqlab {

namespace {

using json = nlohmann::json;

bool contains(const std::vector<DACode>& codes, DACode code) {
    return std::find(codes.begin(), codes.end(), code) != codes.end();
}

// 2x2 agreement table -> kappa
KappaResult kappa_from_counts(DACode code, std::optional<SpeakerRole> role, std::size_t both,
                              std::size_t only_a, std::size_t only_b, std::size_t neither) {
    const std::size_t n = both + only_a + only_b + neither;
    if (n == 0) throw ReliabilityError("kappa requires at least one annotated turn");
    const double dn = static_cast<double>(n);
    const double a_yes = static_cast<double>(both + only_a) / dn;
    const double b_yes = static_cast<double>(both + only_b) / dn;

    KappaResult r{code, role};
    r.n = n;
    r.observed_agreement = static_cast<double>(both + neither) / dn;
    r.expected_agreement = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
    if (r.expected_agreement >= 1.0) {
        if (r.observed_agreement < 1.0) {
            throw ReliabilityError("inconsistent agreement table for " + r.label());
        }
        r.kappa = 1.0;
        r.degenerate = true;
        return r;
    }
    r.kappa = (r.observed_agreement - r.expected_agreement) / (1.0 - r.expected_agreement);
    return r;
}

std::vector<DACode> parse_code_list(const json& value, const char* key, std::size_t line) {
    auto where = "line " + std::to_string(line) + ": ";
    if (!value.is_array()) throw ReliabilityError(where + "'" + key + "' must be an array");
    if (value.size() > 2) throw ReliabilityError(where + "more than 2 codes in '" + key + "'");
    std::vector<DACode> codes;
    for (const auto& item : value) {
        if (!item.is_string()) throw ReliabilityError(where + "codes must be strings");
        auto code = parse_code(item.get_ref<const std::string&>());
        if (!code) throw ReliabilityError(where + "unknown code '" + item.get<std::string>() + "'");
        if (!contains(codes, *code)) codes.push_back(*code);
    }
    return codes;
}

}  // namespace

std::string KappaResult::label() const {
    if (role) return DALabel{*role, code}.str();
    return std::string(to_string(code));
}

KappaResult kappa_per_code(std::span<const DualAnnotation> annotations, DACode code) {
    std::size_t both = 0, only_a = 0, only_b = 0, neither = 0;
    for (const auto& a : annotations) {
        const bool in_a = contains(a.coder_a, code);
        const bool in_b = contains(a.coder_b, code);
        (in_a ? (in_b ? both : only_a) : (in_b ? only_b : neither))++;
    }
    return kappa_from_counts(code, std::nullopt, both, only_a, only_b, neither);
}

KappaResult kappa_per_label(std::span<const DualAnnotation> annotations, DALabel label) {
    std::size_t both = 0, only_a = 0, only_b = 0, neither = 0;
    for (const auto& a : annotations) {
        if (!a.speaker) {
            throw ReliabilityError("annotation " + a.session_id + "#" + std::to_string(a.turn) +
                                   " has no speaker; per-label kappa needs one");
        }
        if (*a.speaker != label.role) continue;
        const bool in_a = contains(a.coder_a, label.code);
        const bool in_b = contains(a.coder_b, label.code);
        (in_a ? (in_b ? both : only_a) : (in_b ? only_b : neither))++;
    }
    return kappa_from_counts(label.code, label.role, both, only_a, only_b, neither);
}

std::vector<KappaResult> kappa_all(std::span<const DualAnnotation> annotations, KappaScope scope) {
    std::vector<KappaResult> results;
    if (scope == KappaScope::Code) {
        for (DACode code : kAllCodes) {
            bool used = std::any_of(annotations.begin(), annotations.end(), [&](const DualAnnotation& a) {
                return contains(a.coder_a, code) || contains(a.coder_b, code);
            });
            if (used) results.push_back(kappa_per_code(annotations, code));
        }
    } else {
        for (std::size_t i = 0; i < DALabel::kCount; ++i) {
            const DALabel label = DALabel::from_index(i);
            bool used = std::any_of(annotations.begin(), annotations.end(), [&](const DualAnnotation& a) {
                return a.speaker == label.role && (contains(a.coder_a, label.code) || contains(a.coder_b, label.code));
            });
            if (used) results.push_back(kappa_per_label(annotations, label));
        }
    }
    std::stable_sort(results.begin(), results.end(), [](const KappaResult& x, const KappaResult& y) {
        if (x.kappa != y.kappa) return x.kappa < y.kappa;
        return x.label() < y.label();
    });
    return results;
}

ICCResult icc_two_way(std::span<const std::array<double, 2>> ratings) {
    constexpr std::size_t k = 2;
    const std::size_t n = ratings.size();
    if (n < 2) throw ReliabilityError("ICC requires at least 2 subjects");
    for (const auto& row : ratings) {
        if (!std::isfinite(row[0]) || !std::isfinite(row[1])) {
            throw ReliabilityError("ICC ratings must be finite");
        }
    }

    double grand = 0.0;
    std::array<double, k> col_mean{};
    std::vector<double> row_mean(n);
    for (std::size_t i = 0; i < n; ++i) {
        row_mean[i] = (ratings[i][0] + ratings[i][1]) / k;
        for (std::size_t j = 0; j < k; ++j) col_mean[j] += ratings[i][j];
        grand += ratings[i][0] + ratings[i][1];
    }
    grand /= static_cast<double>(n * k);
    for (auto& c : col_mean) c /= static_cast<double>(n);

    double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ss_rows += (row_mean[i] - grand) * (row_mean[i] - grand);
        for (std::size_t j = 0; j < k; ++j) ss_total += (ratings[i][j] - grand) * (ratings[i][j] - grand);
    }
    ss_rows *= k;
    for (double c : col_mean) ss_cols += (c - grand) * (c - grand);
    ss_cols *= static_cast<double>(n);
    const double ss_error = std::max(0.0, ss_total - ss_rows - ss_cols);

    ICCResult r;
    r.model = "ICC(2,1) two-way random, absolute agreement, single measure";
    r.n_subjects = n;
    r.n_raters = k;
    r.ms_subjects = ss_rows / static_cast<double>(n - 1);
    r.ms_raters = ss_cols / static_cast<double>(k - 1);
    r.ms_error = ss_error / static_cast<double>((n - 1) * (k - 1));
    if (ss_total == 0.0) {
        r.icc = 1.0;
        r.degenerate = true;
        return r;
    }
    const double dn = static_cast<double>(n);
    const double dk = static_cast<double>(k);
    r.icc = (r.ms_subjects - r.ms_error) /
            (r.ms_subjects + (dk - 1.0) * r.ms_error + dk * (r.ms_raters - r.ms_error) / dn);
    return r;
}

std::vector<DualAnnotation> parse_annotations(std::istream& in) {
    std::vector<DualAnnotation> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = "line " + std::to_string(line_number) + ": ";
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ReliabilityError(where + "malformed JSON: " + e.what());
        }
        if (!record.is_object()) throw ReliabilityError(where + "record must be an object");
        DualAnnotation a;
        auto sid = record.find("session_id");
        if (sid == record.end() || !sid->is_string()) throw ReliabilityError(where + "missing 'session_id'");
        a.session_id = sid->get<std::string>();
        auto turn = record.find("turn");
        if (turn == record.end() || !turn->is_number_unsigned()) {
            throw ReliabilityError(where + "'turn' must be a non-negative integer");
        }
        a.turn = turn->get<std::size_t>();
        if (auto sp = record.find("speaker"); sp != record.end()) {
            if (!sp->is_string() || !parse_role(sp->get<std::string>())) {
                throw ReliabilityError(where + "'speaker' must be \"student\" or \"chatbot\"");
            }
            a.speaker = parse_role(sp->get<std::string>());
        }
        if (!record.contains("a") || !record.contains("b")) throw ReliabilityError(where + "missing 'a' or 'b'");
        a.coder_a = parse_code_list(record["a"], "a", line_number);
        a.coder_b = parse_code_list(record["b"], "b", line_number);
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<DualAnnotation> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ReliabilityError("cannot open annotation file '" + path.string() + "'");
    return parse_annotations(in);
}

std::vector<std::array<double, 2>> parse_icc_csv(std::istream& in) {
    const auto table = csv::read(in);
    const std::size_t ca = table.column("rater_a");
    const std::size_t cb = table.column("rater_b");
    std::vector<std::array<double, 2>> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        try {
            out.push_back({std::stod(table.rows[r][ca]), std::stod(table.rows[r][cb])});
        } catch (const std::exception&) {
            throw ReliabilityError("line " + std::to_string(table.line_numbers[r]) + ": non-numeric rating");
        }
    }
    return out;
}

}  // namespace seqlab
