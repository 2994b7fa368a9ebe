#include "h2k/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace h2k::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open {}", path.string()));
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view field, const std::filesystem::path& path, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorKind::Io, fmt::format("{}:{}: '{}' is not a number", path.string(), line, field));
  }
  return value;
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = text.find(',', start);
      row.push_back(parse_double(text.substr(start, comma - start), path, line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::Io, fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no,
                                             rows.front().size(), row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::Io, fmt::format("{} is empty", path.string()));
  return rows;
}

}  // namespace

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return x;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& x) {
  auto out = open_out(path);
  std::string line;
  for (Index i = 0; i < x.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < x.cols(); ++j) {
      if (j) line += ',';
      line += format_double(x(i, j));
    }
    out << line << '\n';
  }
}

CountMatrix read_counts_csv(const std::filesystem::path& path) {
  const Matrix x = read_matrix_csv(path);
  CountMatrix f(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      if (!(v == 0.0 || v == 1.0 || v == 2.0)) {
        throw Error(ErrorKind::Io, fmt::format("{}: entry ({}, {}) = {} is not an allele count", path.string(),
                                               i, j, v));
      }
      f(i, j) = static_cast<std::uint8_t>(v);
    }
  }
  return f;
}

void write_counts_csv(const std::filesystem::path& path, const CountMatrix& f) {
  auto out = open_out(path);
  std::string line;
  for (Index i = 0; i < f.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < f.cols(); ++j) {
      if (j) line += ',';
      line += static_cast<char>('0' + f(i, j));
    }
    out << line << '\n';
  }
}

Vector read_vector(const std::filesystem::path& path) {
  const auto rows = read_rows(path);
  if (rows.front().size() != 1) {
    throw Error(ErrorKind::Io, fmt::format("{}: expected one value per line", path.string()));
  }
  Vector v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Index>(i)] = rows[i][0];
  return v;
}

void write_vector(const std::filesystem::path& path, const Vector& v) {
  auto out = open_out(path);
  for (Index i = 0; i < v.size(); ++i) out << format_double(v[i]) << '\n';
}

MafVector read_mafs(const std::filesystem::path& path) {
  const Vector p = read_vector(path);
  for (Index j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.01 && p[j] <= 0.5)) {
      throw Error(ErrorKind::Io, fmt::format("{}: MAF {} on line {} is outside [0.01, 0.5]", path.string(), p[j],
                                             j + 1));
    }
  }
  return MafVector(p);
}

IndexSet read_index_set(const std::filesystem::path& path, Index m) {
  const Vector v = read_vector(path);
  IndexSet s;
  s.reserve(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != std::floor(v[i])) {
      throw Error(ErrorKind::Io, fmt::format("{}: line {} is not an integer index", path.string(), i + 1));
    }
    s.push_back(static_cast<Index>(v[i]));
  }
  std::sort(s.begin(), s.end());
  validate_index_set(s, m, "subset file");
  return s;
}

void write_effects_csv(const std::filesystem::path& path, const EffectVector& u) {
  auto out = open_out(path);
  out << "index,u,psi,causal\n";
  std::vector<char> causal(static_cast<std::size_t>(u.size()), 0);
  for (const Index j : u.causal()) causal[static_cast<std::size_t>(j)] = 1;
  for (Index j = 0; j < u.size(); ++j) {
    out << j << ',' << format_double(u.u()[j]) << ',' << format_double(u.psi()[j]) << ','
        << static_cast<int>(causal[static_cast<std::size_t>(j)]) << '\n';
  }
}

EffectVector read_effects_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string header;
  std::getline(in, header);
  if (trim(header) != "index,u,psi,causal") {
    throw Error(ErrorKind::Io, fmt::format("{}: expected header 'index,u,psi,causal'", path.string()));
  }
  std::vector<double> u, psi;
  IndexSet causal;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::stringstream fields(line);
    std::string f[4];
    for (auto& field : f) std::getline(fields, field, ',');
    const double index = parse_double(f[0], path, line_no);
    if (index != static_cast<double>(u.size())) {
      throw Error(ErrorKind::Io, fmt::format("{}:{}: indices must run 0, 1, 2, ...", path.string(), line_no));
    }
    u.push_back(parse_double(f[1], path, line_no));
    psi.push_back(parse_double(f[2], path, line_no));
    if (parse_double(f[3], path, line_no) != 0.0) causal.push_back(static_cast<Index>(index));
  }
  return EffectVector(Eigen::Map<const Vector>(u.data(), static_cast<Index>(u.size())), std::move(causal),
                      Eigen::Map<const Vector>(psi.data(), static_cast<Index>(psi.size())));
}

}  // namespace h2k::io
