#include "mispred/csv.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mispred/errors.hpp"

namespace mispred {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(fmt::format("csv line {}: cannot parse '{}' as a finite number", line_no, s));
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: missing header");
  t.header = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ConfigError(fmt::format("csv line {}: expected {} fields, got {}", line_no,
                                    t.header.size(), cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot open '{}' for writing", path));
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  return in;
}

void write_header(std::ostream& out, Eigen::Index cols, const std::string& prefix) {
  for (Eigen::Index j = 0; j < cols; ++j) out << (j ? "," : "") << prefix << j;
  out << '\n';
}

}  // namespace

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_masked_csv(std::ostream& out, const MaskedMatrix& data) {
  write_header(out, data.cols(), "x");
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) out << ',';
      if (data.mask()(i, j) == 1.0) {
        out << "NA";
      } else {
        out << format_real(data.values()(i, j));
      }
    }
    out << '\n';
  }
}

MaskedMatrix read_masked_csv(std::istream& in) {
  const Table t = read_table(in);
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto d = static_cast<Eigen::Index>(t.header.size());
  Matrix values = Matrix::Zero(n, d);
  Matrix mask = Matrix::Zero(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string& cell = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (cell == "NA") {
        mask(i, j) = 1.0;
      } else {
        values(i, j) = parse_real(cell, static_cast<std::size_t>(i) + 2);
      }
    }
  }
  return MaskedMatrix(std::move(values), std::move(mask));
}

void write_matrix_csv(std::ostream& out, const Matrix& m, const std::string& prefix) {
  write_header(out, m.cols(), prefix);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_real(m(i, j));
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in) {
  const Table t = read_table(in);
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = parse_real(t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                           static_cast<std::size_t>(i) + 2);
  return m;
}

void write_vector_csv(std::ostream& out, const Vector& v, const std::string& name) {
  out << name << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_real(v(i)) << '\n';
}

Vector read_vector_csv(std::istream& in) {
  const Matrix m = read_matrix_csv(in);
  if (m.cols() != 1) throw ConfigError("csv: expected a single column");
  return m.col(0);
}

void write_masked_csv_file(const std::string& path, const MaskedMatrix& data) {
  auto out = open_out(path);
  write_masked_csv(out, data);
}

MaskedMatrix read_masked_csv_file(const std::string& path) {
  auto in = open_in(path);
  return read_masked_csv(in);
}

void write_vector_csv_file(const std::string& path, const Vector& v, const std::string& name) {
  auto out = open_out(path);
  write_vector_csv(out, v, name);
}

Vector read_vector_csv_file(const std::string& path) {
  auto in = open_in(path);
  return read_vector_csv(in);
}

void write_matrix_csv_file(const std::string& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix_csv(out, m, "x");
}

}  // namespace mispred
