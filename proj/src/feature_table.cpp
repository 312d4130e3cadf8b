#include "mlsq/feature_table.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string_view>

#include "mlsq/error.hpp"

namespace mlsq {
namespace {

constexpr std::string_view kPointIndex = "point_index";
constexpr std::string_view kOptN = "OptN";
constexpr std::string_view kC2c = "c2c";
constexpr std::string_view kLabel = "label";
constexpr std::string_view kFold = "fold";
constexpr std::string_view kCell = "cell";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void append_real(std::string& out, double v) {
  char buf[40];
  const int len = std::snprintf(buf, sizeof(buf), "%.9g", v);
  out.append(buf, static_cast<std::size_t>(len));
}

template <class Int>
void append_int(std::string& out, Int v) {
  char buf[24];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

class RowParser {
 public:
  RowParser(const std::filesystem::path& path, std::size_t line) : path_(path), line_(line) {}

  double real(std::string_view token) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) fail(token);
    return v;
  }

  template <class Int>
  Int integer(std::string_view token) const {
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) fail(token);
    return v;
  }

 private:
  [[noreturn]] void fail(std::string_view token) const {
    invalid_input(path_.string() + ":" + std::to_string(line_) + ": malformed value '" + std::string(token) + "'");
  }

  const std::filesystem::path& path_;
  std::size_t line_;
};

}  // namespace

std::vector<std::string> FeatureTable::header() const {
  std::vector<std::string> cols{std::string(kPointIndex)};
  if (has_features) {
    for (auto name : kFeatureNames) cols.emplace_back(name);
    cols.emplace_back(kOptN);
  }
  if (has_c2c) cols.emplace_back(kC2c);
  if (has_label) cols.emplace_back(kLabel);
  if (has_fold) cols.emplace_back(kFold);
  if (has_cell) cols.emplace_back(kCell);
  return cols;
}

void write_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_error("cannot write " + path.string());
  std::string buf;
  const auto cols = table.header();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) buf += ',';
    buf += cols[i];
  }
  buf += '\n';
  for (const FeatureRow& row : table.rows) {
    append_int(buf, row.point_index);
    if (table.has_features) {
      for (double v : row.features) {
        buf += ',';
        append_real(buf, v);
      }
      buf += ',';
      append_int(buf, row.opt_n);
    }
    if (table.has_c2c) {
      buf += ',';
      append_real(buf, row.c2c);
    }
    if (table.has_label) {
      buf += ',';
      append_int(buf, row.label);
    }
    if (table.has_fold) {
      buf += ',';
      append_int(buf, row.fold);
    }
    if (table.has_cell) {
      buf += ',';
      append_int(buf, row.cell);
    }
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) io_error("write failed for " + path.string());
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) invalid_input(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto names = split_commas(line);

  // The header must be a subsequence of the canonical column list, with the
  // feature group all-or-nothing.
  std::vector<std::string_view> canonical{kPointIndex};
  for (auto n : kFeatureNames) canonical.push_back(n);
  canonical.push_back(kOptN);
  canonical.push_back(kC2c);
  canonical.push_back(kLabel);
  canonical.push_back(kFold);
  canonical.push_back(kCell);

  std::vector<std::string> unknown;
  for (auto n : names) {
    bool known = false;
    for (auto c : canonical) known = known || (n == c);
    if (!known) unknown.emplace_back(n);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    invalid_input(path.string() + ": unknown column name(s): " + list);
  }

  FeatureTable table;
  std::size_t pos = 0;
  auto take = [&](std::string_view expected) {
    if (pos < names.size() && names[pos] == expected) {
      ++pos;
      return true;
    }
    return false;
  };
  if (!take(kPointIndex)) invalid_input(path.string() + ": first column must be point_index");
  if (pos < names.size() && names[pos] == kFeatureNames[0]) {
    for (auto n : kFeatureNames) {
      if (!take(n)) invalid_input(path.string() + ": feature columns incomplete or out of order at '" + std::string(n) + "'");
    }
    if (!take(kOptN)) invalid_input(path.string() + ": missing OptN after feature columns");
    table.has_features = true;
  }
  table.has_c2c = take(kC2c);
  table.has_label = take(kLabel);
  table.has_fold = take(kFold);
  table.has_cell = take(kCell);
  if (pos != names.size()) {
    invalid_input(path.string() + ": column '" + std::string(names[pos]) + "' is out of canonical order");
  }

  const std::size_t arity = names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != arity) {
      invalid_input(path.string() + ":" + std::to_string(line_no) + ": ragged row, expected " +
                    std::to_string(arity) + " columns, found " + std::to_string(cells.size()));
    }
    const RowParser parse(path, line_no);
    FeatureRow row;
    std::size_t c = 0;
    row.point_index = parse.integer<std::int64_t>(cells[c++]);
    if (table.has_features) {
      for (double& v : row.features) v = parse.real(cells[c++]);
      row.opt_n = parse.integer<int>(cells[c++]);
    }
    if (table.has_c2c) row.c2c = parse.real(cells[c++]);
    if (table.has_label) row.label = parse.integer<int>(cells[c++]);
    if (table.has_fold) row.fold = parse.integer<int>(cells[c++]);
    if (table.has_cell) row.cell = parse.integer<std::int64_t>(cells[c++]);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace mlsq
