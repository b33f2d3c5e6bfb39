#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "sfd/core.hpp"
#include "sfd/io/csv.hpp"

namespace sfd {

/// Frequency x threads x log2 file size x log2 record size, file >= record.
inline DesignSpace hpc_space(std::vector<std::vector<double>> levels = {}) {
  return DesignSpace({{2.0, 3.5}, {1.0, 64.0}, {2.0, 14.0}, {2.0, 14.0}}, {dominance_constraint(4, 2, 3)},
                     std::move(levels));
}

enum class Log2Mode { Auto, Always, Never };

struct HpcData {
  Dataset data;
  bool transformed = false;  // file and record sizes were converted from KB
  std::vector<std::string> warnings;
};

namespace detail {
inline std::string header_key(const std::string& s) {
  std::string k;
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c))) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return k;
}
}  // namespace detail

/// Reads the Frequency, Threads, FileSize, RecordSize, PVM columns. Sizes are
/// expected as log2 values; raw KB (any value above 14) is transformed in Auto mode.
inline HpcData load_hpc_csv(const std::string& path, Log2Mode mode = Log2Mode::Auto) {
  const CsvTable t = read_csv(path);
  auto find = [&](std::initializer_list<const char*> names) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
      for (const char* n : names)
        if (detail::header_key(t.header[i]) == n) return static_cast<int>(i);
    return -1;
  };
  const int cols[5] = {find({"frequency", "freq", "cpufrequency"}), find({"threads", "noofthreads", "numthreads", "nthreads"}),
                       find({"filesize", "logfilesize"}), find({"recordsize", "logrecordsize"}), find({"pvm", "y"})};
  const char* names[5] = {"Frequency", "Threads", "FileSize", "RecordSize", "PVM"};
  for (int i = 0; i < 5; ++i)
    if (cols[i] < 0) throw FormatError(path + ": missing column " + names[i]);
  Eigen::MatrixXd m = numeric_columns(t, std::vector<int>(cols, cols + 5), path);
  if (m.rows() == 0) throw FormatError(path + ": no data rows");
  HpcData out;
  const bool raw = (m.col(2).array() > 14.0).any() || (m.col(3).array() > 14.0).any();
  if (mode == Log2Mode::Always || (mode == Log2Mode::Auto && raw)) {
    for (int c : {2, 3}) m.col(c) = m.col(c).array().log() / std::log(2.0);
    out.transformed = true;
    out.warnings.push_back("file and record sizes converted to log2");
  }
  std::vector<std::vector<double>> levels(4);
  for (int k = 0; k < 4; ++k) {
    std::set<double> u(m.col(k).data(), m.col(k).data() + m.rows());
    levels[static_cast<std::size_t>(k)].assign(u.begin(), u.end());
  }
  auto space = share(hpc_space(levels));
  PointMatrix nat = m.leftCols(4);
  Design d = make_design(space, to_unit_cube(*space, nat), "hpc");
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!is_feasible_unit(*space, d.points.row(i).transpose()))
      throw InfeasibleRegionError(path + ": row " + std::to_string(i + 2) + " has record size above file size");
  out.data = Dataset(std::move(d), m.col(4));
  return out;
}

}  // namespace sfd
