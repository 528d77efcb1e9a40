#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace olbench::text {

/// Shortest decimal form that parses back to the identical float.
std::string format_float(float value);

/// Writes values separated by single spaces, then a newline.
void write_row(std::ostream& out, std::span<const float> values);

/// Parses a complete token as a finite float; throws ParseError mentioning `context`.
float parse_float(std::string_view token, std::string_view context);
std::size_t parse_count(std::string_view token, std::string_view context);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);

/// Line reader that tracks line numbers and skips blank lines and `#` comments.
class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    /// Next non-blank, non-comment line; false at end of input.
    bool next(std::string& line);
    /// Like next(), but throws ParseError naming `what` at end of input.
    std::string expect(std::string_view what);

    std::size_t line_number() const noexcept { return line_no_; }
    /// "source:line: " prefix for diagnostics.
    std::string where() const;

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

}  // namespace olbench::text
