#include "opnet/snapshot_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "opnet/errors.hpp"

namespace opnet {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ParseError("not a number: '" + cell + "'", line);
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_table(const std::filesystem::path& path, std::size_t first_numeric_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidData, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> row;
    row.reserve(cells.size() - first_numeric_column);
    for (std::size_t c = first_numeric_column; c < cells.size(); ++c) row.push_back(parse_number(cells[c], line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ParseError("empty file " + path.string(), line_no == 0 ? 1 : line_no);
  return table;
}

std::string name_or(const std::vector<std::string>& names, std::size_t i, const std::string& fallback) {
  return i < names.size() ? names[i] : fallback;
}

}  // namespace

std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path meta = csv_path;
  meta.replace_extension(".meta.csv");
  return meta;
}

void write_snapshot_csv(const std::filesystem::path& path, const SnapshotMatrix& snapshots,
                        const SnapshotCsvNames& names) {
  const auto n = snapshots.rows();
  const auto m = snapshots.cols();
  const auto dim_y = snapshots.row_coords().cols();
  const auto dim_u = snapshots.col_meta().cols();
  const bool timed = snapshots.kind() == Aggregation::TimeAggregated;

  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidData, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);

  for (Eigen::Index d = 0; d < dim_y; ++d) {
    if (d) out << ',';
    out << name_or(names.coord_names, static_cast<std::size_t>(d), d == 0 ? "y" : "y" + std::to_string(d));
  }
  for (Eigen::Index j = 0; j < m; ++j) out << ',' << name_or(names.column_labels, static_cast<std::size_t>(j), "c" + std::to_string(j));
  out << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < dim_y; ++d) {
      if (d) out << ',';
      out << snapshots.row_coords()(i, d);
    }
    for (Eigen::Index j = 0; j < m; ++j) out << ',' << snapshots.values()(i, j);
    out << '\n';
  }

  std::ofstream meta(meta_path_for(path));
  if (!meta) throw Error(ErrorKind::InvalidData, "cannot write " + meta_path_for(path).string());
  meta << std::setprecision(std::numeric_limits<double>::max_digits10);
  meta << (timed ? "time" : "scenario");
  for (Eigen::Index d = 0; d < dim_u; ++d) {
    meta << ',' << name_or(names.meta_names, static_cast<std::size_t>(d), timed ? "t" : "u" + std::to_string(d));
  }
  meta << '\n';
  for (Eigen::Index j = 0; j < m; ++j) {
    meta << name_or(names.column_labels, static_cast<std::size_t>(j), "c" + std::to_string(j));
    for (Eigen::Index d = 0; d < dim_u; ++d) meta << ',' << snapshots.col_meta()(j, d);
    meta << '\n';
  }
}

SnapshotMatrix load_snapshot_csv(const std::filesystem::path& path) {
  const auto meta_file = meta_path_for(path);
  if (!std::filesystem::exists(meta_file)) {
    throw Error(ErrorKind::MetaMissing, "metadata file not found: " + meta_file.string());
  }
  const CsvTable meta = read_table(meta_file, 1);
  const std::string& tag = meta.header.front();
  Aggregation kind;
  if (tag == "scenario") {
    kind = Aggregation::ScenarioAggregated;
  } else if (tag == "time") {
    kind = Aggregation::TimeAggregated;
  } else {
    throw ParseError("metadata header must start with 'scenario' or 'time', found '" + tag + "'", 1);
  }
  const auto m = static_cast<Eigen::Index>(meta.rows.size());
  const auto dim_u = static_cast<Eigen::Index>(meta.header.size()) - 1;
  if (m == 0) throw ParseError("metadata lists no columns", 2);

  const CsvTable data = read_table(path, 0);
  const auto width = static_cast<Eigen::Index>(data.header.size());
  const Eigen::Index dim_y = width - m;
  if (dim_y < 1) {
    throw ParseError("header has " + std::to_string(width) + " fields but metadata lists " + std::to_string(m) +
                         " snapshot columns",
                     1);
  }
  if (data.rows.empty()) throw ParseError("no data rows in " + path.string(), 2);

  const auto n = static_cast<Eigen::Index>(data.rows.size());
  Eigen::MatrixXd coords(n, dim_y);
  Eigen::MatrixXd values(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < dim_y; ++d) coords(i, d) = row[static_cast<std::size_t>(d)];
    for (Eigen::Index j = 0; j < m; ++j) values(i, j) = row[static_cast<std::size_t>(dim_y + j)];
  }
  Eigen::MatrixXd col_meta(m, dim_u);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index d = 0; d < dim_u; ++d) col_meta(j, d) = meta.rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
  }
  return SnapshotMatrix(std::move(values), kind, std::move(coords), std::move(col_meta));
}

}  // namespace opnet
