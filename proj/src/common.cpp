#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"

#include <charconv>
#include <cstdio>

namespace popfrac {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::data: return "data";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

std::string to_hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t from_hex(std::string_view text) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(ErrorKind::data, "invalid hex digest '" + std::string(text) + "'");
    }
    return value;
}

namespace csv {

bool read_row(std::istream& in, Row& row) {
    row.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;

    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (;;) {
        const int ch = in.get();
        if (ch == std::char_traits<char>::eof()) {
            if (quoted) fail(ErrorKind::data, "csv: unterminated quoted field");
            row.push_back(std::move(field));
            return true;
        }
        const char c = static_cast<char>(ch);
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            row.push_back(std::move(field));
            return true;
        } else {
            field += c;
            field_started = true;
        }
    }
}

std::vector<Row> read_all(std::istream& in) {
    std::vector<Row> rows;
    Row row;
    while (read_row(in, row)) {
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        rows.push_back(row);
    }
    return rows;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << escape(row[i]);
    }
    out << '\n';
}

}  // namespace csv
}  // namespace popfrac
