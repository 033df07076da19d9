#include "seqlab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

namespace seqlab {

namespace {

using json = nlohmann::json;

constexpr std::array<CodeInfo, kNumCodes> kCodeTable = {{
    {DACode::Q, "Q", "Referential Question", Dimension::MeaningFocused, Function::Inviting},
    {DACode::G, "G", "Greeting/Closing", Dimension::MeaningFocused, Function::Inviting},
    {DACode::T, "T", "Topic Shifting", Dimension::MeaningFocused, Function::Inviting},
    {DACode::S, "S", "Seeking Clarification", Dimension::MeaningFocused, Function::Sustaining},
    {DACode::A, "A", "Agreement", Dimension::MeaningFocused, Function::Sustaining},
    {DACode::D, "D", "Disagreement", Dimension::MeaningFocused, Function::Sustaining},
    {DACode::M, "M", "Misinterpretation", Dimension::MeaningFocused, Function::Sustaining},
    {DACode::R, "R", "Response", Dimension::MeaningFocused, Function::ContentFeedback},
    {DACode::Cr, "Cr", "Recast", Dimension::FormFocused, Function::CorrectiveFeedback},
    {DACode::Cp, "Cp", "Prompting", Dimension::FormFocused, Function::CorrectiveFeedback},
    {DACode::Ce, "Ce", "Explicit Correction", Dimension::FormFocused, Function::CorrectiveFeedback},
}};

const std::string& require_string(const json& object, const char* key, std::size_t line) {
    auto it = object.find(key);
    if (it == object.end()) throw CorpusError(std::string("missing field '") + key + "'", line);
    if (!it->is_string()) throw CorpusError(std::string("field '") + key + "' must be a string", line);
    return it->get_ref<const std::string&>();
}

Turn parse_turn(const json& value, std::size_t position, std::size_t line) {
    const std::string where = "turn " + std::to_string(position) + ": ";
    if (!value.is_object()) throw CorpusError(where + "must be an object", line);
    auto speaker_it = value.find("speaker");
    if (speaker_it == value.end() || !speaker_it->is_string()) {
        throw CorpusError(where + "missing string field 'speaker'", line);
    }
    auto role = parse_role(speaker_it->get_ref<const std::string&>());
    if (!role) {
        throw CorpusError(where + "unknown speaker '" + speaker_it->get<std::string>() + "'", line);
    }
    auto codes_it = value.find("codes");
    if (codes_it == value.end() || !codes_it->is_array()) {
        throw CorpusError(where + "missing array field 'codes'", line);
    }
    if (codes_it->size() > 2) {
        throw CorpusError(where + "more than 2 codes per turn (" + std::to_string(codes_it->size()) + ")",
                          line);
    }
    Turn turn;
    turn.speaker = *role;
    for (const auto& symbol : *codes_it) {
        if (!symbol.is_string()) throw CorpusError(where + "codes must be strings", line);
        auto code = parse_code(symbol.get_ref<const std::string&>());
        if (!code) {
            throw CorpusError(where + "unknown code '" + symbol.get<std::string>() + "'", line);
        }
        if (std::find(turn.codes.begin(), turn.codes.end(), *code) != turn.codes.end()) {
            throw CorpusError(where + "duplicate code '" + symbol.get<std::string>() + "'", line);
        }
        turn.codes.push_back(*code);
    }
    return turn;
}

}  // namespace

const CodeInfo& code_info(DACode code) {
    return kCodeTable[static_cast<std::size_t>(code)];
}

std::string_view to_string(DACode code) {
    return code_info(code).symbol;
}

std::optional<DACode> parse_code(std::string_view symbol) {
    for (const auto& info : kCodeTable) {
        if (info.symbol == symbol) return info.code;
    }
    return std::nullopt;
}

std::string_view to_string(Dimension dimension) {
    return dimension == Dimension::MeaningFocused ? "meaning-focused" : "form-focused";
}

std::string_view to_string(Function function) {
    switch (function) {
        case Function::Inviting: return "inviting";
        case Function::Sustaining: return "sustaining";
        case Function::ContentFeedback: return "content-feedback";
        case Function::CorrectiveFeedback: return "corrective-feedback";
    }
    return "";
}

std::string_view prefix(SpeakerRole role) {
    return role == SpeakerRole::Student ? "[s]" : "[t]";
}

std::string_view to_string(SpeakerRole role) {
    return role == SpeakerRole::Student ? "student" : "chatbot";
}

std::optional<SpeakerRole> parse_role(std::string_view name) {
    if (name == "student") return SpeakerRole::Student;
    if (name == "chatbot") return SpeakerRole::Chatbot;
    return std::nullopt;
}

std::string DALabel::str() const {
    std::string out(prefix(role));
    out += to_string(code);
    return out;
}

std::optional<DALabel> parse_label(std::string_view text) {
    if (text.size() < 4) return std::nullopt;
    SpeakerRole role;
    if (text.starts_with("[s]")) {
        role = SpeakerRole::Student;
    } else if (text.starts_with("[t]")) {
        role = SpeakerRole::Chatbot;
    } else {
        return std::nullopt;
    }
    auto code = parse_code(text.substr(3));
    if (!code) return std::nullopt;
    return DALabel{role, *code};
}

const Session* Corpus::find(std::string_view session_id) const {
    for (const auto& s : sessions) {
        if (s.session_id == session_id) return &s;
    }
    return nullptr;
}

std::size_t Corpus::turn_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.turns.size();
    return n;
}

CorpusError::CorpusError(const std::string& message, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

LoadedCorpus parse_corpus(std::istream& in) {
    LoadedCorpus result;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorpusError(std::string("malformed JSON: ") + e.what(), line_number);
        }
        if (!record.is_object()) throw CorpusError("record must be a JSON object", line_number);

        Session session;
        session.session_id = require_string(record, "session_id", line_number);
        session.learner_id = require_string(record, "learner_id", line_number);
        if (!seen_ids.insert(session.session_id).second) {
            throw CorpusError("duplicate session_id '" + session.session_id + "'", line_number);
        }
        for (const auto& [key, value] : record.items()) {
            if (key != "session_id" && key != "learner_id" && key != "turns") {
                result.warnings.push_back("line " + std::to_string(line_number) + ": ignoring unknown key '" +
                                          key + "'");
            }
        }

        auto turns_it = record.find("turns");
        if (turns_it == record.end() || !turns_it->is_array()) {
            throw CorpusError("missing array field 'turns'", line_number);
        }
        std::size_t position = 0;
        for (const auto& value : *turns_it) {
            Turn turn = parse_turn(value, position++, line_number);
            if (turn.codes.empty()) {
                ++result.removed_empty_turns;
                continue;
            }
            turn.index = session.turns.size();
            session.turns.push_back(std::move(turn));
        }
        result.corpus.learners.insert(session.learner_id);
        result.corpus.sessions.push_back(std::move(session));
    }
    return result;
}

LoadedCorpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& session : corpus.sessions) {
        json turns = json::array();
        for (const auto& turn : session.turns) {
            json codes = json::array();
            for (DACode c : turn.codes) codes.push_back(std::string(to_string(c)));
            turns.push_back({{"speaker", std::string(to_string(turn.speaker))}, {"codes", std::move(codes)}});
        }
        json record = {{"session_id", session.session_id},
                       {"learner_id", session.learner_id},
                       {"turns", std::move(turns)}};
        out << record.dump() << '\n';
    }
}

Corpus make_corpus(std::vector<Session> sessions) {
    Corpus corpus;
    corpus.sessions = std::move(sessions);
    for (const auto& s : corpus.sessions) corpus.learners.insert(s.learner_id);
    return corpus;
}

std::size_t ValidationReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(),
                                                  [](const Issue& i) { return i.severity == Severity::Error; }));
}

std::size_t ValidationReport::warning_count() const {
    return issues.size() - error_count();
}

ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    auto add = [&](Severity severity, const std::string& session, std::optional<std::size_t> turn,
                   std::string message) {
        report.issues.push_back({severity, session, turn, std::move(message)});
    };

    std::unordered_set<std::string> ids;
    for (const auto& session : corpus.sessions) {
        const auto& id = session.session_id;
        if (!ids.insert(id).second) add(Severity::Error, id, std::nullopt, "duplicate session_id");
        if (!corpus.learners.contains(session.learner_id)) {
            add(Severity::Error, id, std::nullopt, "learner '" + session.learner_id + "' not in learner set");
        }
        if (session.turns.empty()) add(Severity::Error, id, std::nullopt, "session has no turns");

        for (std::size_t i = 0; i < session.turns.size(); ++i) {
            const Turn& turn = session.turns[i];
            if (turn.index != i) {
                add(Severity::Error, id, i,
                    "turn index " + std::to_string(turn.index) + " breaks contiguous numbering");
            }
            if (turn.codes.empty() || turn.codes.size() > 2) {
                add(Severity::Error, id, i, "turn has " + std::to_string(turn.codes.size()) + " codes (expected 1-2)");
            }
            if (turn.codes.size() == 2 && turn.codes[0] == turn.codes[1]) {
                add(Severity::Error, id, i, "duplicate code in turn");
            }
            if (turn.speaker == SpeakerRole::Student) {
                for (DACode c : turn.codes) {
                    if (is_corrective(c)) {
                        add(Severity::Warning, id, i,
                            "corrective-feedback code " + std::string(to_string(c)) + " on a student turn");
                    }
                }
            }
        }
    }
    return report;
}

EventStream flatten(const Session& session) {
    EventStream stream;
    stream.session_id = session.session_id;
    for (const auto& turn : session.turns) {
        for (DACode c : turn.codes) stream.events.push_back({turn.speaker, c});
    }
    return stream;
}

std::vector<EventStream> flatten(const Corpus& corpus) {
    std::vector<EventStream> streams;
    streams.reserve(corpus.sessions.size());
    for (const auto& s : corpus.sessions) streams.push_back(flatten(s));
    return streams;
}

void sort_canonical(std::vector<LabelCount>& counts) {
    std::stable_sort(counts.begin(), counts.end(), [](const LabelCount& a, const LabelCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.label.str() < b.label.str();
    });
}

namespace {

void accumulate(const Session& session, std::array<std::size_t, DALabel::kCount>& counts) {
    for (const auto& turn : session.turns) {
        for (DACode c : turn.codes) ++counts[DALabel{turn.speaker, c}.index()];
    }
}

std::vector<LabelCount> to_counts(const std::array<std::size_t, DALabel::kCount>& counts) {
    std::vector<LabelCount> out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i]) out.push_back({DALabel::from_index(i), counts[i]});
    }
    sort_canonical(out);
    return out;
}

}  // namespace

std::vector<LabelCount> label_counts(const Corpus& corpus) {
    std::array<std::size_t, DALabel::kCount> counts{};
    for (const auto& s : corpus.sessions) accumulate(s, counts);
    return to_counts(counts);
}

std::vector<LabelCount> label_counts(const Session& session) {
    std::array<std::size_t, DALabel::kCount> counts{};
    accumulate(session, counts);
    return to_counts(counts);
}

CorpusSummary summarize(const Corpus& corpus) {
    CorpusSummary summary;
    summary.sessions = corpus.sessions.size();
    summary.learners = corpus.learners.size();
    summary.turns = corpus.turn_count();
    summary.label_counts = label_counts(corpus);
    for (const auto& lc : summary.label_counts) summary.total_events += lc.count;
    if (summary.sessions > 0) {
        summary.mean_turns_per_session = static_cast<double>(summary.turns) / static_cast<double>(summary.sessions);
    }
    return summary;
}

}  // namespace seqlab
