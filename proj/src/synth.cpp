#include "seqlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "json.hpp"
#include "seqlab/rng.hpp"

namespace seqlab {

namespace {

// Overall label counts of the reference corpus.
struct Weighted {
    const char* label;
    double count;
};
constexpr Weighted kReferenceCounts[] = {
    {"[t]Q", 2186}, {"[s]R", 1895}, {"[t]A", 1323}, {"[t]S", 331}, {"[t]R", 179}, {"[t]Cp", 169}, {"[s]S", 128},
    {"[s]Q", 110},  {"[s]M", 96},   {"[s]G", 93},   {"[t]G", 82},  {"[t]Ce", 78}, {"[s]T", 68},  {"[t]Cr", 66},
    {"[t]T", 54},   {"[s]D", 47},   {"[s]A", 19},   {"[t]D", 17},  {"[t]M", 16},
};

constexpr double kSumTolerance = 1e-9;

void check_distribution(const std::vector<double>& p, std::size_t size, const std::string& what) {
    if (p.size() != size) throw SynthError(what + " has wrong length");
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw SynthError(what + " has a negative or non-finite entry");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) throw SynthError(what + " does not sum to 1");
}

// Planted labels grouped into turns: a new turn starts on a role change,
// after two codes, or on a repeated code.
std::vector<Turn> planted_turns(const std::vector<DALabel>& labels) {
    std::vector<Turn> turns;
    for (DALabel l : labels) {
        const bool extend = !turns.empty() && turns.back().speaker == l.role && turns.back().codes.size() < 2 &&
                            turns.back().codes.front() != l.code;
        if (!extend) turns.push_back(Turn{0, l.role, {}});
        turns.back().codes.push_back(l.code);
    }
    return turns;
}

class SessionSampler {
public:
    SessionSampler(const GeneratorSpec& spec, rng::Engine& engine) : spec_(spec), engine_(engine) {}

    std::vector<Turn> sample_turns(std::size_t count) {
        std::vector<Turn> turns;
        std::optional<std::size_t> previous;
        for (std::size_t t = 0; t < count; ++t) {
            Turn turn;
            turn.index = t;
            turn.speaker = t % 2 == 0 ? SpeakerRole::Chatbot : SpeakerRole::Student;
            const std::size_t first = draw(previous, turn.speaker, std::nullopt);
            turn.codes.push_back(spec_.alphabet[first].code);
            previous = first;
            if (rng::unit(engine_) < spec_.two_code_rate) {
                if (auto second = try_draw(first, turn.speaker, first)) {
                    turn.codes.push_back(spec_.alphabet[*second].code);
                    previous = *second;
                }
            }
            turns.push_back(std::move(turn));
        }
        return turns;
    }

private:
    std::optional<std::size_t> try_draw(std::optional<std::size_t> from, SpeakerRole role,
                                        std::optional<std::size_t> exclude) {
        const auto& row = from ? spec_.transitions[*from] : spec_.initial;
        double mass = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (spec_.alphabet[i].role == role && i != exclude) mass += row[i];
        }
        if (mass <= 0.0) return std::nullopt;
        const double target = rng::unit(engine_) * mass;
        double acc = 0.0;
        std::optional<std::size_t> last;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (spec_.alphabet[i].role != role || i == exclude || row[i] <= 0.0) continue;
            acc += row[i];
            last = i;
            if (target < acc) return i;
        }
        return last;
    }

    std::size_t draw(std::optional<std::size_t> from, SpeakerRole role, std::optional<std::size_t> exclude) {
        if (auto i = try_draw(from, role, exclude)) return *i;
        return *try_draw(std::nullopt, role, exclude);  // validated: initial has mass for both roles
    }

    const GeneratorSpec& spec_;
    rng::Engine& engine_;
};

}  // namespace

void GeneratorSpec::validate() const {
    if (n_learners < 2) throw SynthError("need at least 2 learners");
    if (sessions_per_learner < 1) throw SynthError("need at least 1 session per learner");
    if (turns_min < 1 || turns_max < turns_min) throw SynthError("invalid turn range");
    if (alphabet.empty()) throw SynthError("empty alphabet");
    for (std::size_t i = 0; i < alphabet.size(); ++i) {
        for (std::size_t j = i + 1; j < alphabet.size(); ++j) {
            if (alphabet[i] == alphabet[j]) throw SynthError("duplicate label " + alphabet[i].str() + " in alphabet");
        }
    }
    check_distribution(initial, alphabet.size(), "initial distribution");
    if (transitions.size() != alphabet.size()) throw SynthError("transition matrix has wrong size");
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        check_distribution(transitions[i], alphabet.size(), "transition row " + alphabet[i].str());
    }
    for (SpeakerRole role : {SpeakerRole::Student, SpeakerRole::Chatbot}) {
        double mass = 0.0;
        for (std::size_t i = 0; i < alphabet.size(); ++i) {
            if (alphabet[i].role == role) mass += initial[i];
        }
        if (mass <= 0.0) throw SynthError("initial distribution gives no mass to " + std::string(to_string(role)));
    }
    if (!(two_code_rate >= 0.0 && two_code_rate <= 1.0)) throw SynthError("two_code_rate must be in [0, 1]");
    if (planted) {
        if (planted->labels.empty()) throw SynthError("planted pattern is empty");
        for (double r : {planted->rate_hp, planted->rate_lp}) {
            if (!(r >= 0.0 && r <= 1.0)) throw SynthError("injection rates must be in [0, 1]");
        }
    }
}

GeneratorSpec default_generator_spec() {
    GeneratorSpec spec;
    double total = 0.0;
    for (const auto& w : kReferenceCounts) total += w.count;
    for (const auto& w : kReferenceCounts) {
        spec.alphabet.push_back(*parse_label(w.label));
        spec.initial.push_back(w.count / total);
    }
    spec.transitions.assign(spec.alphabet.size(), spec.initial);
    return spec;
}

SyntheticData generate(const GeneratorSpec& spec) {
    spec.validate();
    SyntheticData data;
    data.manifest.seed = spec.seed;
    data.manifest.planted = spec.planted;

    const std::size_t n_hp = spec.n_learners / 2;
    const int width = std::max(2, static_cast<int>(std::to_string(spec.n_learners).size()));
    const int session_width = std::max(2, static_cast<int>(std::to_string(spec.sessions_per_learner).size()));
    const auto run = spec.planted ? planted_turns(spec.planted->labels) : std::vector<Turn>{};

    std::vector<Session> sessions;
    for (std::size_t l = 0; l < spec.n_learners; ++l) {
        const std::string learner = fmt::format("L{:0{}}", l + 1, width);
        const Group group = l < n_hp ? Group::HP : Group::LP;
        data.groups.learners[learner] = group;
        for (std::size_t s = 0; s < spec.sessions_per_learner; ++s) {
            rng::Engine engine = rng::make_engine(spec.seed, l * spec.sessions_per_learner + s);
            Session session;
            session.session_id = fmt::format("{}-S{:0{}}", learner, s + 1, session_width);
            session.learner_id = learner;
            const std::size_t n_turns =
                spec.turns_min + static_cast<std::size_t>(rng::bounded(engine, spec.turns_max - spec.turns_min + 1));
            session.turns = SessionSampler(spec, engine).sample_turns(n_turns);

            if (spec.planted) {
                const double rate = group == Group::HP ? spec.planted->rate_hp : spec.planted->rate_lp;
                if (rng::unit(engine) < rate) {
                    const std::size_t at = static_cast<std::size_t>(rng::bounded(engine, session.turns.size() + 1));
                    std::size_t offset = 0;
                    for (std::size_t t = 0; t < at; ++t) offset += session.turns[t].codes.size();
                    session.turns.insert(session.turns.begin() + static_cast<std::ptrdiff_t>(at), run.begin(),
                                         run.end());
                    data.manifest.injections.push_back({session.session_id, learner, group, at, offset});
                }
            }
            for (std::size_t t = 0; t < session.turns.size(); ++t) session.turns[t].index = t;
            data.groups.sessions[session.session_id] = group;
            sessions.push_back(std::move(session));
        }
    }
    data.corpus = make_corpus(std::move(sessions));
    return data;
}

void write_manifest(std::ostream& out, const Manifest& manifest) {
    using json = nlohmann::ordered_json;
    json doc;
    doc["seed"] = manifest.seed;
    if (manifest.planted) {
        json labels = json::array();
        for (auto l : manifest.planted->labels) labels.push_back(l.str());
        doc["planted"] = {{"labels", labels},
                          {"rate_hp", manifest.planted->rate_hp},
                          {"rate_lp", manifest.planted->rate_lp}};
    } else {
        doc["planted"] = nullptr;
    }
    json injections = json::array();
    for (const auto& inj : manifest.injections) {
        injections.push_back({{"session_id", inj.session_id},
                              {"learner_id", inj.learner_id},
                              {"group", std::string(to_string(inj.group))},
                              {"turn_index", inj.turn_index},
                              {"event_offset", inj.event_offset}});
    }
    doc["injections"] = std::move(injections);
    out << doc.dump(2) << '\n';
}

}  // namespace seqlab
