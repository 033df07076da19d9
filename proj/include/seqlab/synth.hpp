#ifndef SEQLAB_SYNTH_HPP
#define SEQLAB_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqlab/corpus.hpp"
#include "seqlab/scoring.hpp"

namespace seqlab {

class SynthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlantedPattern {
    std::vector<DALabel> labels;
    double rate_hp = 0.0;  // per-session injection probability
    double rate_lp = 0.0;
};

/// Markov chain over DA labels. Roles alternate turn by turn (chatbot
/// first); each draw is the transition row restricted to the turn's role.
struct GeneratorSpec {
    std::size_t n_learners = 12;
    std::size_t sessions_per_learner = 6;
    std::size_t turns_min = 60;
    std::size_t turns_max = 80;
    std::vector<DALabel> alphabet;
    std::vector<double> initial;
    std::vector<std::vector<double>> transitions;
    double two_code_rate = 0.4;  // probability that a turn carries a second code
    std::optional<PlantedPattern> planted;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Alphabet and marginals from the observed overall DA distribution; every
/// transition row equals the marginal.
GeneratorSpec default_generator_spec();

struct Injection {
    std::string session_id;
    std::string learner_id;
    Group group;
    std::size_t turn_index;    // first inserted turn
    std::size_t event_offset;  // position of the first planted label in the flattened stream
};

struct Manifest {
    std::uint64_t seed = 0;
    std::optional<PlantedPattern> planted;
    std::vector<Injection> injections;
};

struct SyntheticData {
    Corpus corpus;
    GroupAssignment groups;  // first floor(n/2) learners are HP
    Manifest manifest;
};

/// Deterministic for a given spec; each session draws from its own derived seed.
SyntheticData generate(const GeneratorSpec& spec);

void write_manifest(std::ostream& out, const Manifest& manifest);

}  // namespace seqlab

#endif  // SEQLAB_SYNTH_HPP
