#include "vlab/csv.hpp"

#include <fstream>

namespace vlab {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    if (!have_header) {
      t.header = split_csv_line(line);
      have_header = true;
    } else {
      auto row = split_csv_line(line);
      if (row.size() != t.header.size())
        fail(ErrorKind::Report, "row width mismatch in " + path.string() + ": " + line);
      t.rows.push_back(std::move(row));
    }
  }
  if (!have_header) fail(ErrorKind::Report, "no header in " + path.string());
  return t;
}

}  // namespace vlab
