#include "seqbreak_app/app.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace seqbreak::app {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& cell, std::size_t line_no) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw UsageError("csv line " + std::to_string(line_no) + ": not a number: '" + t + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

std::vector<Observation> read_csv(std::istream& in, std::size_t p) {
  std::string line;
  if (!std::getline(in, line)) {
    throw UsageError("csv: empty input, header x1,...,xp,y required");
  }
  const auto header = split(line);
  bool ok = header.size() == p + 1;
  for (std::size_t j = 0; ok && j < p; ++j) {
    ok = trim(header[j]) == "x" + std::to_string(j + 1);
  }
  ok = ok && trim(header[p]) == "y";
  if (!ok) {
    std::string want;
    for (std::size_t j = 0; j < p; ++j) {
      want += "x" + std::to_string(j + 1) + ",";
    }
    throw UsageError("csv: expected header '" + want + "y', got '" + trim(line) + "'");
  }

  std::vector<Observation> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != p + 1) {
      throw UsageError("csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(p + 1) + " columns, got " + std::to_string(cells.size()));
    }
    Observation obs;
    obs.x.resize(p);
    for (std::size_t j = 0; j < p; ++j) {
      obs.x[j] = parse_number(cells[j], line_no);
    }
    obs.y = parse_number(cells[p], line_no);
    rows.push_back(std::move(obs));
  }
  return rows;
}

std::vector<Observation> read_csv_file(const std::string& path, std::size_t p) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open '" + path + "'");
  }
  return read_csv(in, p);
}

void write_csv(std::ostream& out, const std::vector<Observation>& data) {
  const std::size_t p = data.empty() ? 1 : data.front().x.size();
  for (std::size_t j = 0; j < p; ++j) {
    out << 'x' << (j + 1) << ',';
  }
  out << "y\n";
  for (const auto& obs : data) {
    for (double v : obs.x) {
      out << format_double(v) << ',';
    }
    out << format_double(obs.y) << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<Observation>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw UsageError("cannot write '" + path + "'");
  }
  write_csv(out, data);
}

} // namespace seqbreak::app
