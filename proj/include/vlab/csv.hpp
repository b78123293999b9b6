#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vlab/error.hpp"

namespace vlab {

/// Minimal comma-separated table: '#' lines are comments, no quoting (fields
/// in this project never contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  int64_t col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int64_t(i);
    return -1;
  }

  int64_t require_col(const std::string& name) const {
    int64_t c = col(name);
    if (c < 0) fail(ErrorKind::Report, "missing column '" + name + "'");
    return c;
  }
};

std::vector<std::string> split_csv_line(const std::string& line);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace vlab
