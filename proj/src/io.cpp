// Copyright 2026 The ksdd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ksdd/io.hpp"

#include "ksdd/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ksdd {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Index>(i);
  }
  return -1;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw InputError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  table.header = split(line);
  if (table.header.empty()) throw InputError(path.string() + ": missing header");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(table.header.size()) + " columns");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path, line_no));
    rows.push_back(std::move(row));
  }
  const auto cols = static_cast<Index>(table.header.size());
  table.values.resize(static_cast<Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < cols; ++j) table.values(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values) {
  if (static_cast<Index>(header.size()) != values.cols()) {
    throw InputError("write_csv: header width differs from column count");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) out << (c ? "," : "") << format_double(values(r, c));
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> numbered_header(const std::string& prefix, Index n) {
  std::vector<std::string> h;
  for (Index i = 1; i <= n; ++i) h.push_back(prefix + std::to_string(i));
  return h;
}

void write_particles_csv(const std::filesystem::path& path, const Positions& positions) {
  write_csv(path, numbered_header("x", positions.cols()), positions);
}

Positions read_particles_csv(const std::filesystem::path& path) { return read_csv(path).values; }

LabeledDataset read_labeled_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const Index ycol = table.column("y");
  if (ycol < 0) throw InputError(path.string() + ": no 'y' column");
  if (table.values.rows() == 0) throw InputError(path.string() + ": empty dataset");
  const Index p = table.values.cols() - 1;
  LabeledDataset data;
  data.labels = table.values.col(ycol);
  data.features.resize(table.values.rows(), p);
  Index out = 0;
  for (Index c = 0; c < table.values.cols(); ++c) {
    if (c == ycol) continue;
    data.features.col(out++) = table.values.col(c);
  }
  data.validate();
  return data;
}

void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& data) {
  data.validate();
  std::vector<std::string> header{"y"};
  for (const auto& h : numbered_header("f", data.num_features())) header.push_back(h);
  Matrix values(data.size(), data.num_features() + 1);
  values.col(0) = data.labels;
  values.rightCols(data.num_features()) = data.features;
  write_csv(path, header, values);
}

Standardizer Standardizer::fit(const Matrix& features) {
  Standardizer s;
  const auto n = static_cast<double>(features.rows());
  s.mean = features.colwise().mean().transpose();
  s.scale = Vector::Ones(features.cols());
  for (Index c = 0; c < features.cols(); ++c) {
    const double var = (features.col(c).array() - s.mean(c)).square().sum() / std::max(n, 1.0);
    if (var > 0.0) s.scale(c) = std::sqrt(var);
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw InputError("standardizer: feature count mismatch");
  return ((features.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

}  // namespace ksdd
