#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sfd/bench/experiment.hpp"
#include "sfd/core.hpp"

namespace sfd {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_number(const std::string& s, const std::string& where) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw FormatError(where + ": '" + s + "' is not a number");
  return v;
}

}  // namespace detail

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline CsvTable read_csv_stream(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw FormatError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw FormatError(name + ": empty CSV file");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return read_csv_stream(in, path);
}

/// Numeric matrix from the named columns.
inline Eigen::MatrixXd numeric_columns(const CsvTable& t, const std::vector<int>& cols, const std::string& name) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          detail::parse_number(t.rows[r][static_cast<std::size_t>(cols[c])], name + ":" + std::to_string(r + 2));
  return m;
}

/// Natural-scale points from a CSV with x1..xd columns (other columns ignored).
inline PointMatrix read_points_csv(const std::string& path, int d = -1) {
  const CsvTable t = read_csv(path);
  std::vector<int> cols;
  for (int k = 1;; ++k) {
    const int c = t.column("x" + std::to_string(k));
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) throw FormatError(path + ": no x1..xd columns");
  if (d >= 0 && static_cast<int>(cols.size()) != d)
    throw FormatError(path + ": expected " + std::to_string(d) + " coordinates, found " + std::to_string(cols.size()));
  return numeric_columns(t, cols, path);
}

inline void write_points_csv(std::ostream& out, const PointMatrix& natural, const std::vector<PointTag>* tags = nullptr,
                             const Vector* values = nullptr, const std::string& value_name = "y") {
  for (Eigen::Index k = 0; k < natural.cols(); ++k) out << (k ? "," : "") << "x" << (k + 1);
  if (values) out << "," << value_name;
  if (tags) out << ",tag";
  out << "\n";
  for (Eigen::Index i = 0; i < natural.rows(); ++i) {
    for (Eigen::Index k = 0; k < natural.cols(); ++k) out << (k ? "," : "") << format_double(natural(i, k));
    if (values) out << "," << format_double((*values)[i]);
    if (tags) out << "," << ((*tags)[static_cast<std::size_t>(i)].augmented ? "augmented" : "sfd");
    out << "\n";
  }
}

/// Dataset from x1..xd,y columns. Without a space, bounds are the data range.
inline Dataset read_dataset_csv(const std::string& path, SpacePtr space = nullptr) {
  const CsvTable t = read_csv(path);
  const int yc = t.column("y");
  if (yc < 0) throw FormatError(path + ": no y column");
  std::vector<int> cols;
  for (int k = 1;; ++k) {
    const int c = t.column("x" + std::to_string(k));
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) throw FormatError(path + ": no x1..xd columns");
  const Eigen::MatrixXd x = numeric_columns(t, cols, path);
  const Eigen::MatrixXd y = numeric_columns(t, {yc}, path);
  if (x.rows() == 0) throw FormatError(path + ": no data rows");
  if (!space) {
    std::vector<Bound> b;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      double lo = x.col(k).minCoeff(), hi = x.col(k).maxCoeff();
      if (!(hi > lo)) hi = lo + 1.0;
      b.push_back({lo, hi});
    }
    space = share(DesignSpace(std::move(b)));
  }
  PointMatrix nat = x;
  Design d = make_design(space, to_unit_cube(*space, nat), "data");
  return Dataset(std::move(d), y.col(0));
}

// ---------------------------------------------------------------- records

inline void write_records_csv(std::ostream& out, const std::vector<MetricRecord>& recs) {
  out << "design,surrogate,budget,replication,rmse,mape,failed,failure\n";
  for (const auto& r : recs) {
    std::string failure = r.failure;
    for (char& c : failure)
      if (c == ',' || c == '\n' || c == '"') c = ';';
    out << r.design_name << "," << r.surrogate_name << "," << r.budget << "," << r.replication << ","
        << format_double(r.rmse) << "," << format_double(r.mape) << "," << (r.failed ? 1 : 0) << "," << failure << "\n";
  }
}

inline void write_timings_csv(std::ostream& out, const std::vector<MetricRecord>& recs) {
  out << "design,surrogate,budget,replication,wall_time_s\n";
  for (const auto& r : recs)
    out << r.design_name << "," << r.surrogate_name << "," << r.budget << "," << r.replication << ","
        << format_double(r.wall_time_s) << "\n";
}

inline std::vector<MetricRecord> read_records_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const char* need[] = {"design", "surrogate", "budget", "replication", "rmse", "mape"};
  for (const char* n : need)
    if (t.column(n) < 0) throw FormatError(path + ": missing column '" + std::string(n) + "'");
  const int cf = t.column("failed"), cm = t.column("failure"), cw = t.column("wall_time_s");
  std::vector<MetricRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(r + 2);
    MetricRecord m;
    m.design_name = row[static_cast<std::size_t>(t.column("design"))];
    m.surrogate_name = row[static_cast<std::size_t>(t.column("surrogate"))];
    m.budget = static_cast<int>(detail::parse_number(row[static_cast<std::size_t>(t.column("budget"))], where));
    m.replication = static_cast<int>(detail::parse_number(row[static_cast<std::size_t>(t.column("replication"))], where));
    m.rmse = detail::parse_number(row[static_cast<std::size_t>(t.column("rmse"))], where);
    m.mape = detail::parse_number(row[static_cast<std::size_t>(t.column("mape"))], where);
    if (cf >= 0) m.failed = row[static_cast<std::size_t>(cf)] == "1";
    if (cm >= 0) m.failure = row[static_cast<std::size_t>(cm)];
    if (cw >= 0) m.wall_time_s = detail::parse_number(row[static_cast<std::size_t>(cw)], where);
    out.push_back(std::move(m));
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "design,surrogate,budget,count,failures,rmse_mean,rmse_se,mape_mean,mape_se\n";
  for (const auto& r : rows)
    out << r.design_name << "," << r.surrogate_name << "," << r.budget << "," << r.count << "," << r.failures << ","
        << format_double(r.rmse_mean) << "," << format_double(r.rmse_se) << "," << format_double(r.mape_mean) << ","
        << format_double(r.mape_se) << "\n";
}

/// Wide error-vs-budget table for one metric: a row per (surrogate, budget),
/// a mean and se column per design.
inline void write_plotdata_csv(std::ostream& out, const std::vector<SummaryRow>& rows, bool use_rmse) {
  std::vector<std::string> designs, surrogates;
  std::vector<int> budgets;
  auto add = [](auto& v, const auto& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
  };
  for (const auto& r : rows) {
    add(designs, r.design_name);
    add(surrogates, r.surrogate_name);
    add(budgets, r.budget);
  }
  std::sort(budgets.begin(), budgets.end());
  out << "surrogate,budget";
  for (const auto& d : designs) out << "," << d << "_mean," << d << "_se";
  out << "\n";
  for (const auto& s : surrogates) {
    for (int b : budgets) {
      bool any = false;
      std::ostringstream line;
      line << s << "," << b;
      for (const auto& d : designs) {
        const SummaryRow* r = find_row(rows, d, s, b);
        if (r) {
          any = true;
          line << "," << format_double(use_rmse ? r->rmse_mean : r->mape_mean) << ","
               << format_double(use_rmse ? r->rmse_se : r->mape_se);
        } else {
          line << ",,";
        }
      }
      if (any) out << line.str() << "\n";
    }
  }
}

inline void write_cv_csv(std::ostream& out, const std::vector<CvResult>& res) {
  out << "method,rmse,mape,folds,skipped\n";
  for (const auto& r : res)
    out << r.kind << "," << format_double(r.rmse) << "," << format_double(r.mape) << "," << r.folds << ","
        << (r.skipped ? 1 : 0) << "\n";
}

}  // namespace sfd
