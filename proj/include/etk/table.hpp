#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace etk {

/// Malformed input data. The message always carries a source location.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TableHeader {
  std::string source;
  std::vector<std::string> columns;
};

/// One data row of a delimiter-separated table.
class TableRow {
 public:
  TableRow(std::shared_ptr<const TableHeader> header, std::size_t line,
           std::vector<std::string> cells)
      : header_(std::move(header)), line_(line), cells_(std::move(cells)) {}

  /// Cell by column name; throws InputError if the column is absent.
  [[nodiscard]] const std::string& at(std::string_view column) const;
  /// Cell by column name, or nullopt when the column is absent or the cell is blank.
  [[nodiscard]] std::optional<std::string> opt(std::string_view column) const;

  [[nodiscard]] double number(std::string_view column) const;
  [[nodiscard]] long integer(std::string_view column) const;
  [[nodiscard]] bool flag(std::string_view column) const;

  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::vector<std::string>& cells() const { return cells_; }

  /// InputError annotated with `source:line`.
  [[nodiscard]] InputError error(const std::string& what) const;

 private:
  std::shared_ptr<const TableHeader> header_;
  std::size_t line_;
  std::vector<std::string> cells_;
};

/// Delimiter-separated text table with a header row. Lines starting with `#`
/// are metadata: `# key=value key2=value2`.
class Table {
 public:
  static Table read(const std::filesystem::path& path, char delimiter = ',');
  static Table parse(std::string_view text, std::string source, char delimiter = ',');

  [[nodiscard]] const std::vector<std::string>& columns() const { return header_->columns; }
  [[nodiscard]] const std::vector<TableRow>& rows() const { return rows_; }
  [[nodiscard]] bool has_column(std::string_view name) const;
  [[nodiscard]] std::optional<std::size_t> column_index(std::string_view name) const;
  [[nodiscard]] const std::map<std::string, std::string>& meta() const { return meta_; }
  [[nodiscard]] const std::string& source() const { return header_->source; }

  /// Throws InputError naming the first missing column.
  void require_columns(std::initializer_list<std::string_view> names) const;

 private:
  std::shared_ptr<TableHeader> header_ = std::make_shared<TableHeader>();
  std::vector<TableRow> rows_;
  std::map<std::string, std::string> meta_;
};

std::vector<std::string> split(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

/// Writes comma-separated rows. Cells must not contain commas or newlines.
class TableWriter {
 public:
  TableWriter(std::ostream& out, std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
  std::size_t width_;
};

std::string format_number(double value, int precision = 6);

}  // namespace etk
