#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sgdnoise {

/// 17 significant digits ("%.17g"); non-finite values print as nan / inf / -inf.
std::string format_double(double value);

/// Minimal CSV writer; one header, then rows of preformatted cells.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(double value);
  CsvWriter& cell(long long value);
  CsvWriter& cell(unsigned long long value);
  CsvWriter& cell(unsigned long value) { return cell((unsigned long long)value); }
  CsvWriter& cell(int value) { return cell((long long)value); }
  CsvWriter& cell(const std::string& value);
  void end_row();

  const std::filesystem::path& path() const { return path_; }

 private:
  void sep();
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

/// Matrix flattened row-major: columns row, col, value.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace sgdnoise
