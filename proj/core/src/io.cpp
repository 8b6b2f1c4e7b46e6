#include "dfm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "dfm/errors.hpp"

namespace dfm {

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw NumericError("format_double: conversion failed");
  return std::string(buffer, ptr);
}

CsvWriter::CsvWriter(std::string header, std::uint64_t master_seed) {
  columns_ = 1;
  for (const char c : header) columns_ += (c == ',');
  text_ = "# master_seed=" + std::to_string(master_seed) + "\n" + std::move(header) + "\n";
}

void CsvWriter::add_row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw InputError("csv: row has " + std::to_string(fields.size()) + " fields, expected " +
                     std::to_string(columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += fields[i];
  }
  text_ += '\n';
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("csv: cannot write " + path);
  out << text_;
}

}  // namespace dfm
