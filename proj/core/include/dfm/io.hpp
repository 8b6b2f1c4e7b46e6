#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dfm {

/// Shortest decimal form that parses back to the exact same double.
std::string format_double(double value);

/// CSV with a `# key=value` metadata line, then a header, then rows.  All
/// content is assembled in memory and written by a single writer so reruns
/// are byte-identical.
class CsvWriter {
 public:
  CsvWriter(std::string header, std::uint64_t master_seed);

  void add_row(const std::vector<std::string>& fields);
  const std::string& text() const { return text_; }
  void write(const std::string& path) const;

 private:
  std::string text_;
  std::size_t columns_;
};

}  // namespace dfm
