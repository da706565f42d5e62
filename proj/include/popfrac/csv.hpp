#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace popfrac::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
/// newlines. Returns false at end of input.
bool read_row(std::istream& in, Row& row);

std::vector<Row> read_all(std::istream& in);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace popfrac::csv
