#include "sgdnoise/csv.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace sgdnoise {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::out | std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::sep() {
  if (in_row_ >= columns_) throw std::logic_error("CsvWriter: too many cells in row of " + path_.string());
  if (in_row_++ > 0) out_ << ',';
}

CsvWriter& CsvWriter::cell(double value) {
  sep();
  out_ << format_double(value);
  return *this;
}

CsvWriter& CsvWriter::cell(long long value) {
  sep();
  out_ << value;
  return *this;
}

CsvWriter& CsvWriter::cell(unsigned long long value) {
  sep();
  out_ << value;
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& value) {
  sep();
  out_ << value;
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw std::logic_error("CsvWriter: incomplete row in " + path_.string());
  out_ << '\n';
  in_row_ = 0;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  CsvWriter w(path, {"row", "col", "value"});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      w.cell((long long)r).cell((long long)c).cell(m(r, c));
      w.end_row();
    }
}

}  // namespace sgdnoise
