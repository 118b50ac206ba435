#include "rkhs_ode/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace rkhs_ode {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, long line_no, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ": column '" + column +
                         "' is not a number: '" + text + "'",
                     line_no);
  }
  if (!std::isfinite(value)) {
    throw ParseError("line " + std::to_string(line_no) + ": column '" + column +
                         "' is not finite: '" + text + "'",
                     line_no);
  }
  return value;
}

}  // namespace

void Trajectory::validate() const {
  if (times.size() < 1) throw UsageError("trajectory '" + id + "' has no observations");
  if (values.cols() != times.size()) throw UsageError("trajectory '" + id + "': size mismatch");
  for (Eigen::Index j = 1; j < times.size(); ++j) {
    if (!(times(j) > times(j - 1))) {
      throw UsageError("trajectory '" + id + "': times must be strictly ascending");
    }
  }
  if (!times.allFinite() || !values.allFinite()) {
    throw UsageError("trajectory '" + id + "': non-finite values");
  }
}

double Dataset::max_time() const {
  double t = -std::numeric_limits<double>::infinity();
  for (const auto& tr : trajectories) t = std::max(t, tr.times(tr.size() - 1));
  return t;
}

double Dataset::min_time() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& tr : trajectories) t = std::min(t, tr.times(0));
  return t;
}

Eigen::Index Dataset::total_observations() const {
  Eigen::Index n = 0;
  for (const auto& tr : trajectories) n += tr.size();
  return n;
}

Matrix Dataset::stacked_values() const {
  Matrix out(dim, total_observations());
  Eigen::Index c = 0;
  for (const auto& tr : trajectories) {
    out.middleCols(c, tr.size()) = tr.values;
    c += tr.size();
  }
  return out;
}

void Dataset::validate() const {
  if (trajectories.empty()) throw UsageError("dataset has no trajectories");
  for (const auto& tr : trajectories) {
    tr.validate();
    if (tr.dim() != dim) throw UsageError("trajectory '" + tr.id + "' has the wrong dimension");
  }
}

Dataset parse_dataset(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.size() < 3 || header[0] != "traj_id" || header[1] != "t") {
    throw ParseError("line " + std::to_string(line_no) +
                         ": header must be 'traj_id,t,y1,...,yd'",
                     line_no);
  }
  const int d = static_cast<int>(header.size()) - 2;

  struct Row {
    double t;
    Vector y;
    long line;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != d + 2) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 2) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    if (fields[0].empty()) throw ParseError("line " + std::to_string(line_no) + ": empty traj_id", line_no);
    Row r{parse_number(fields[1], line_no, "t"), Vector(d), line_no};
    for (int c = 0; c < d; ++c) r.y(c) = parse_number(fields[c + 2], line_no, header[c + 2]);
    auto [it, inserted] = rows.try_emplace(fields[0]);
    if (inserted) order.push_back(fields[0]);
    it->second.push_back(std::move(r));
  }

  Dataset ds;
  ds.dim = d;
  for (const auto& id : order) {
    auto& rs = rows.at(id);
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    Trajectory tr;
    tr.id = id;
    tr.times.resize(static_cast<Eigen::Index>(rs.size()));
    tr.values.resize(d, static_cast<Eigen::Index>(rs.size()));
    for (std::size_t j = 0; j < rs.size(); ++j) {
      if (j > 0 && rs[j].t == rs[j - 1].t) {
        throw ParseError("line " + std::to_string(rs[j].line) + ": duplicate time " +
                             std::to_string(rs[j].t) + " for trajectory '" + id + "'",
                         rs[j].line);
      }
      tr.times(static_cast<Eigen::Index>(j)) = rs[j].t;
      tr.values.col(static_cast<Eigen::Index>(j)) = rs[j].y;
    }
    ds.trajectories.push_back(std::move(tr));
  }
  if (ds.trajectories.empty()) throw ParseError("no data rows", line_no);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string format_dataset(const Dataset& dataset) {
  std::string out = "traj_id,t";
  for (int c = 0; c < dataset.dim; ++c) out += ",y" + std::to_string(c + 1);
  out += '\n';
  for (const auto& tr : dataset.trajectories) {
    for (Eigen::Index j = 0; j < tr.size(); ++j) {
      out += tr.id;
      out += ',';
      append_number(out, tr.times(j));
      for (int c = 0; c < dataset.dim; ++c) {
        out += ',';
        append_number(out, tr.values(c, j));
      }
      out += '\n';
    }
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_dataset(dataset);
  if (!out) throw IoError("write failed: " + path.string());
}

int nearest_node(double t, double t_start, double h) {
  const double q = (t - t_start) / h;
  const double fl = std::floor(q);
  return static_cast<int>(q - fl > 0.5 ? fl + 1.0 : fl);
}

TimeGrid build_grid(const Trajectory& trajectory, double h) {
  if (!(h > 0.0)) throw UsageError("grid step h must be > 0");
  TimeGrid g;
  g.h = h;
  g.t_start = trajectory.times(0);
  g.obs_index.reserve(static_cast<std::size_t>(trajectory.size()));
  for (Eigen::Index j = 0; j < trajectory.size(); ++j) {
    g.obs_index.push_back(nearest_node(trajectory.times(j), g.t_start, h));
  }
  g.k = g.obs_index.back();
  return g;
}

std::vector<TimeGrid> build_grid(const Dataset& dataset, double h) {
  if (!(h > 0.0)) throw UsageError("grid step h must be > 0");
  const double gap = min_gap(dataset);
  if (std::isfinite(gap) && h > gap * (1.0 + 1e-9)) {
    warn("grid step h = " + std::to_string(h) + " exceeds the smallest observation gap " +
         std::to_string(gap) + "; several observations share grid nodes");
  }
  std::vector<TimeGrid> grids;
  grids.reserve(dataset.size());
  for (const auto& tr : dataset.trajectories) grids.push_back(build_grid(tr, h));
  return grids;
}

double min_gap(const Dataset& dataset) {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& tr : dataset.trajectories) {
    for (Eigen::Index j = 1; j < tr.size(); ++j) gap = std::min(gap, tr.times(j) - tr.times(j - 1));
  }
  return gap;
}

Dataset add_noise(const Dataset& dataset, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw UsageError("noise sigma must be >= 0");
  Dataset out = dataset;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& tr : out.trajectories) {
    for (Eigen::Index j = 0; j < tr.values.cols(); ++j) {
      for (Eigen::Index c = 0; c < tr.values.rows(); ++c) tr.values(c, j) += normal(rng);
    }
  }
  return out;
}

SampleWeights sample_weights(const Trajectory& trajectory, double horizon, double h) {
  const Eigen::Index m = trajectory.size();
  const double last = trajectory.times(m - 1);
  if (horizon < last) throw UsageError("horizon T precedes the last observation time");
  SampleWeights w;
  w.weights.resize(m);
  for (Eigen::Index j = 0; j + 1 < m; ++j) w.weights(j) = trajectory.times(j + 1) - trajectory.times(j);
  w.weights(m - 1) = std::max(horizon - last, h);
  return w;
}

Vector interpolate(const Trajectory& trajectory, double t) {
  const Eigen::Index m = trajectory.size();
  if (t <= trajectory.times(0)) return trajectory.values.col(0);
  if (t >= trajectory.times(m - 1)) return trajectory.values.col(m - 1);
  const double* begin = trajectory.times.data();
  const auto hi = std::upper_bound(begin, begin + m, t) - begin;
  const auto lo = hi - 1;
  const double a = (t - trajectory.times(lo)) / (trajectory.times(hi) - trajectory.times(lo));
  return (1.0 - a) * trajectory.values.col(lo) + a * trajectory.values.col(hi);
}

}  // namespace rkhs_ode
