#include "etk/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace etk {

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view text, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(delimiter, start);
    out.emplace_back(trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

InputError TableRow::error(const std::string& what) const {
  return InputError(header_->source + ":" + std::to_string(line_) + ": " + what);
}

const std::string& TableRow::at(std::string_view column) const {
  const auto& cols = header_->columns;
  const auto it = std::find(cols.begin(), cols.end(), column);
  if (it == cols.end()) throw error("missing column '" + std::string(column) + "'");
  return cells_[static_cast<std::size_t>(it - cols.begin())];
}

std::optional<std::string> TableRow::opt(std::string_view column) const {
  const auto& cols = header_->columns;
  const auto it = std::find(cols.begin(), cols.end(), column);
  if (it == cols.end()) return std::nullopt;
  const auto& cell = cells_[static_cast<std::size_t>(it - cols.begin())];
  if (cell.empty()) return std::nullopt;
  return cell;
}

double TableRow::number(std::string_view column) const {
  const auto& cell = at(column);
  // std::from_chars for double is missing in some libstdc++ builds; strtod is enough here.
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
    throw error("column '" + std::string(column) + "': not a number: '" + cell + "'");
  }
  return v;
}

long TableRow::integer(std::string_view column) const {
  const auto& cell = at(column);
  long v = 0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc{} || p != cell.data() + cell.size()) {
    throw error("column '" + std::string(column) + "': not an integer: '" + cell + "'");
  }
  return v;
}

bool TableRow::flag(std::string_view column) const {
  const auto& cell = at(column);
  if (cell == "1" || cell == "true" || cell == "TRUE" || cell == "yes") return true;
  if (cell.empty() || cell == "0" || cell == "false" || cell == "FALSE" || cell == "no") {
    return false;
  }
  throw error("column '" + std::string(column) + "': not a flag: '" + cell + "'");
}

// ---------------------------------------------------------------------------

Table Table::read(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string(), delimiter);
}

Table Table::parse(std::string_view text, std::string source, char delimiter) {
  Table t;
  t.header_->source = std::move(source);
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream kv{std::string(line.substr(1))};
      std::string token;
      while (kv >> token) {
        const auto eq = token.find('=');
        if (eq != std::string::npos) t.meta_[token.substr(0, eq)] = token.substr(eq + 1);
      }
      continue;
    }
    auto cells = split(line, delimiter);
    if (!header_seen) {
      t.header_->columns = std::move(cells);
      header_seen = true;
      continue;
    }
    if (cells.size() != t.header_->columns.size()) {
      throw InputError(t.header_->source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header_->columns.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    t.rows_.emplace_back(t.header_, line_no, std::move(cells));
  }
  if (!header_seen) throw InputError(t.header_->source + ": missing header row");
  return t;
}

bool Table::has_column(std::string_view name) const { return column_index(name).has_value(); }

std::optional<std::size_t> Table::column_index(std::string_view name) const {
  const auto& cols = header_->columns;
  const auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cols.begin());
}

void Table::require_columns(std::initializer_list<std::string_view> names) const {
  for (auto n : names) {
    if (!has_column(n)) {
      throw InputError(header_->source + ": missing column '" + std::string(n) + "'");
    }
  }
}

// ---------------------------------------------------------------------------

TableWriter::TableWriter(std::ostream& out, std::vector<std::string> header)
    : out_(out), width_(header.size()) {
  row(header);
}

void TableWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw std::logic_error("TableWriter: row width " + std::to_string(cells.size()) +
                           " != header width " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

std::string format_number(double value, int precision) {
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", value);
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, value);
  return buf;
}

}  // namespace etk
