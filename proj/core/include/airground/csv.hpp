#pragma once

#include <string>
#include <vector>

namespace airground::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws InputError if absent.
  std::size_t column(const std::string& name) const;
};

/// Reads a comma-separated file with a header line. Blank lines are skipped,
/// fields are trimmed, and every row must have as many fields as the header.
Table read(const std::string& path);

/// Throws InputError unless the header equals `expected` exactly.
void expect_header(const Table& table, const std::vector<std::string>& expected,
                   const std::string& path);

double to_double(const std::string& field, const std::string& context);
long long to_int(const std::string& field, const std::string& context);

}  // namespace airground::csv
