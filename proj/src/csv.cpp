#include "seqlab/csv.hpp"

#include <istream>
#include <ostream>

namespace seqlab::csv {

CsvError::CsvError(const std::string& message, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

std::vector<std::string> split_line(std::string_view line, std::size_t line_number) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool field_started_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"' && current.empty() && !field_started_quoted) {
            quoted = true;
            field_started_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
            field_started_quoted = false;
        } else {
            current.push_back(c);
        }
    }
    if (quoted) throw CsvError("unterminated quoted field", line_number);
    fields.push_back(std::move(current));
    return fields;
}

std::string escape(std::string_view field) {
    const bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos ||
                              (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw CsvError("missing column '" + std::string(name) + "'", 1);
}

Table read(std::istream& in) {
    Table table;
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line, line_number);
        if (!have_header) {
            if (line_number == 1 && !fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) {
                fields[0].erase(0, 3);
            }
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw CsvError("expected " + std::to_string(table.header.size()) + " fields, found " +
                               std::to_string(fields.size()),
                           line_number);
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_number);
    }
    if (!have_header) throw CsvError("empty CSV input (no header)", 0);
    return table;
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << escape(fields[i]);
    }
    out_ << '\n';
}

}  // namespace seqlab::csv
