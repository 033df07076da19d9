#ifndef SEQLAB_RELIABILITY_HPP
#define SEQLAB_RELIABILITY_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlab/corpus.hpp"

namespace seqlab {

class ReliabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two coders' code sets for one turn. Either set may be empty.
struct DualAnnotation {
    std::string session_id;
    std::size_t turn = 0;
    std::optional<SpeakerRole> speaker;  // needed only for per-label kappa
    std::vector<DACode> coder_a;
    std::vector<DACode> coder_b;
};

struct KappaResult {
    DACode code;
    std::optional<SpeakerRole> role;  // set for role-prefixed results
    double kappa = 0.0;
    double observed_agreement = 0.0;
    double expected_agreement = 0.0;
    std::size_t n = 0;
    bool degenerate = false;  // both coders constant and identical; kappa reported as 1

    std::string label() const;
};

/// Cohen's kappa on the presence/absence of `code` per turn.
KappaResult kappa_per_code(std::span<const DualAnnotation> annotations, DACode code);

/// Same, restricted to turns spoken by `label.role`. Every annotation must
/// carry a speaker.
KappaResult kappa_per_label(std::span<const DualAnnotation> annotations, DALabel label);

enum class KappaScope { Code, Label };

/// One result per code (or label) used by either coder, sorted by ascending
/// kappa with ties broken on label text.
std::vector<KappaResult> kappa_all(std::span<const DualAnnotation> annotations,
                                   KappaScope scope = KappaScope::Code);

struct ICCResult {
    double icc = 0.0;
    std::string model;
    std::size_t n_subjects = 0;
    std::size_t n_raters = 0;
    double ms_subjects = 0.0;
    double ms_raters = 0.0;
    double ms_error = 0.0;
    bool degenerate = false;  // all cells equal; icc reported as 1
};

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
/// Requires at least two subjects.
ICCResult icc_two_way(std::span<const std::array<double, 2>> ratings);

/// JSON Lines: {"session_id": str, "turn": int, "a": [codes], "b": [codes]}
/// with an optional "speaker".
std::vector<DualAnnotation> parse_annotations(std::istream& in);
std::vector<DualAnnotation> load_annotations(const std::filesystem::path& path);

/// CSV with header subject,rater_a,rater_b.
std::vector<std::array<double, 2>> parse_icc_csv(std::istream& in);

}  // namespace seqlab

#endif  // SEQLAB_RELIABILITY_HPP
