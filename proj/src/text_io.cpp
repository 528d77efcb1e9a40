#include "olbench/text_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "olbench/errors.hpp"

namespace olbench::text {

std::string format_float(float value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_row(std::ostream& out, std::span<const float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        out << format_float(values[i]);
    }
    out << '\n';
}

float parse_float(std::string_view token, std::string_view context) {
    float value = 0.0f;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (!token.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(value)) {
        throw ParseError(std::string(context) + ": expected a finite number, got '" + std::string(token) + "'");
    }
    return value;
}

std::size_t parse_count(std::string_view token, std::string_view context) {
    std::size_t value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw ParseError(std::string(context) + ": expected a non-negative integer, got '" + std::string(token) +
                         "'");
    }
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool LineReader::next(std::string& line) {
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        return true;
    }
    return false;
}

std::string LineReader::expect(std::string_view what) {
    std::string line;
    if (!next(line)) {
        throw ParseError(where() + "unexpected end of input, expected " + std::string(what));
    }
    return line;
}

std::string LineReader::where() const { return source_ + ":" + std::to_string(line_no_) + ": "; }

}  // namespace olbench::text
