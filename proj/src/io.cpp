#include "triadda/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "triadda/errors.hpp"

namespace triadda {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open for reading: " + path);
  return f;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<double> parse_row(const std::string& line) {
  std::vector<double> out;
  for (const std::string& tok : split_csv(line)) out.push_back(std::strtod(tok.c_str(), nullptr));
  return out;
}

}  // namespace

void write_stat_series_csv(const std::string& path, const StatSeries& series) {
  const int d = series.dim();
  std::ofstream f = open_out(path);
  f << "t";
  for (int k = 0; k < d; ++k) f << ",mean_" << (k + 1);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) f << ",cov_" << (a + 1) << (b + 1);
  f << ",M3\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    f << format_double(series.times[i]);
    for (int k = 0; k < d; ++k)
      f << ',' << format_double(series.mean(static_cast<Eigen::Index>(i), k));
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b)
        f << ',' << format_double(series.cov_flat(static_cast<Eigen::Index>(i), a * d + b));
    f << ',' << format_double(series.m3[i]) << '\n';
  }
}

StatSeries read_stat_series_csv(const std::string& path) {
  std::ifstream f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty series file: " + path);
  int d = 0;
  for (const std::string& col : split_csv(line))
    if (col.rfind("mean_", 0) == 0) ++d;
  if (d == 0) throw ConfigError("no mean columns in " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line));
  }
  const std::size_t expected = 1 + static_cast<std::size_t>(d) +
                               static_cast<std::size_t>(d * (d + 1) / 2) + 1;
  StatSeries out;
  out.times.resize(rows.size());
  out.mean.resize(static_cast<Eigen::Index>(rows.size()), d);
  out.cov_flat.resize(static_cast<Eigen::Index>(rows.size()), d * d);
  out.m3.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != expected)
      throw ConfigError("malformed series row in " + path);
    std::size_t at = 0;
    out.times[i] = rows[i][at++];
    for (int k = 0; k < d; ++k) out.mean(static_cast<Eigen::Index>(i), k) = rows[i][at++];
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        const double v = rows[i][at++];
        out.cov_flat(static_cast<Eigen::Index>(i), a * d + b) = v;
        out.cov_flat(static_cast<Eigen::Index>(i), b * d + a) = v;
      }
    out.m3[i] = rows[i][at];
  }
  if (out.times.size() >= 2) out.dt = out.times[1] - out.times[0];
  return out;
}

void write_snapshot_csv(const std::string& path, const RowMatrixXd& samples) {
  std::ofstream f = open_out(path);
  const int d = static_cast<int>(samples.cols());
  for (int k = 0; k < d; ++k) f << (k ? "," : "") << "u_" << (k + 1);
  f << '\n';
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (int k = 0; k < d; ++k)
      f << (k ? "," : "") << format_double(samples(i, k));
    f << '\n';
  }
}

RowMatrixXd read_snapshot_csv(const std::string& path) {
  std::ifstream f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty snapshot file: " + path);
  const int d = static_cast<int>(split_csv(line).size());
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line));
  }
  RowMatrixXd out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw ConfigError("malformed snapshot row in " + path);
    for (int k = 0; k < d; ++k) out(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
  }
  return out;
}

void write_observations_csv(const std::string& path, const ObservationSeries& obs) {
  std::ofstream f = open_out(path);
  const int s = obs.s;
  f << "t";
  for (int k = 0; k < s; ++k) f << ",du_" << (k + 1);
  for (int a = 0; a < s; ++a)
    for (int b = a; b < s; ++b) f << ",dR_" << (a + 1) << (b + 1);
  f << '\n';
  for (std::size_t j = 0; j < obs.size(); ++j) {
    f << format_double(obs.times[j]);
    for (int k = 0; k < s; ++k)
      f << ',' << format_double(obs.d_ubar(static_cast<Eigen::Index>(j), k));
    for (int a = 0; a < s; ++a)
      for (int b = a; b < s; ++b)
        f << ',' << format_double(obs.d_R_flat(static_cast<Eigen::Index>(j), a * s + b));
    f << '\n';
  }
}

ObservationSeries read_observations_csv(const std::string& path) {
  std::ifstream f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty observation file: " + path);
  int s = 0;
  for (const std::string& col : split_csv(line))
    if (col.rfind("du_", 0) == 0) ++s;
  if (s == 0) throw ConfigError("no du columns in " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_row(line));
  }
  ObservationSeries out;
  out.s = s;
  out.times.resize(rows.size());
  out.d_ubar.resize(static_cast<Eigen::Index>(rows.size()), s);
  out.d_R_flat.resize(static_cast<Eigen::Index>(rows.size()), s * s);
  const std::size_t expected = 1 + static_cast<std::size_t>(s) +
                               static_cast<std::size_t>(s * (s + 1) / 2);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != expected)
      throw ConfigError("malformed observation row in " + path);
    std::size_t at = 0;
    out.times[j] = rows[j][at++];
    for (int k = 0; k < s; ++k) out.d_ubar(static_cast<Eigen::Index>(j), k) = rows[j][at++];
    for (int a = 0; a < s; ++a)
      for (int b = a; b < s; ++b) {
        const double v = rows[j][at++];
        out.d_R_flat(static_cast<Eigen::Index>(j), a * s + b) = v;
        out.d_R_flat(static_cast<Eigen::Index>(j), b * s + a) = v;
      }
  }
  if (out.times.size() >= 2) out.dt_obs = out.times[1] - out.times[0];
  else if (out.times.size() == 1) out.dt_obs = out.times[0];
  return out;
}

}  // namespace triadda
