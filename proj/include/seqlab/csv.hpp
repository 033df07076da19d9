#ifndef SEQLAB_CSV_HPP
#define SEQLAB_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqlab::csv {

class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& message, std::size_t line);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Splits one CSV record. Double-quoted fields may contain commas and
/// doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line, std::size_t line_number = 0);

/// Quotes a field only when it contains a comma, quote or leading/trailing space.
std::string escape(std::string_view field);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    /// Index of a header column; throws CsvError if absent.
    std::size_t column(std::string_view name) const;
};

/// Reads a header line followed by records. Blank lines are skipped and
/// every record must have as many fields as the header.
Table read(std::istream& in);

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

}  // namespace seqlab::csv

#endif  // SEQLAB_CSV_HPP
