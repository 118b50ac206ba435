#pragma once

#include "rkhs_ode/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rkhs_ode {

/// One observed time series. `values` holds one observation per column (d x m).
struct Trajectory {
  std::string id;
  Vector times;
  Matrix values;

  [[nodiscard]] Eigen::Index size() const { return times.size(); }
  [[nodiscard]] int dim() const { return static_cast<int>(values.rows()); }
  /// Throws UsageError unless times ascend strictly, sizes agree and values are finite.
  void validate() const;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  int dim = 0;
  /// Maximum time T; 0 means "not set", in which case max_time() is used.
  double horizon = 0.0;

  [[nodiscard]] std::size_t size() const { return trajectories.size(); }
  [[nodiscard]] double max_time() const;
  [[nodiscard]] double min_time() const;
  [[nodiscard]] double effective_horizon() const { return horizon > 0.0 ? horizon : max_time(); }
  [[nodiscard]] Eigen::Index total_observations() const;
  /// All observations side by side (d x M), trajectory-major.
  [[nodiscard]] Matrix stacked_values() const;
  void validate() const;
};

/// Regular grid s_l = t_start + l h, l = 0..k, for one trajectory, with the
/// nearest node k_j of every observation.
struct TimeGrid {
  double t_start = 0.0;
  double h = 0.0;
  int k = 0;
  std::vector<int> obs_index;

  [[nodiscard]] double node(int l) const { return t_start + l * h; }
  [[nodiscard]] int nodes() const { return k + 1; }
};

/// Observation weights w_j = t_{j+1} - t_j with t_{m+1} = T.
struct SampleWeights {
  Vector weights;
};

Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& csv_text);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string format_dataset(const Dataset& dataset);

/// Nearest-node index of time t on a grid starting at t_start; exact half
/// distances round down.
int nearest_node(double t, double t_start, double h);

/// One grid per trajectory spanning its first to last observation.
std::vector<TimeGrid> build_grid(const Dataset& dataset, double h);
TimeGrid build_grid(const Trajectory& trajectory, double h);

/// Smallest positive gap between consecutive observation times.
double min_gap(const Dataset& dataset);

/// Adds N(0, sigma^2) noise to every coordinate of every observation.
Dataset add_noise(const Dataset& dataset, double sigma, std::uint64_t seed);

/// The last weight is max(T - t_m, h).
SampleWeights sample_weights(const Trajectory& trajectory, double horizon, double h);

/// Piecewise-linear interpolation of the observations at `t`, held constant
/// outside the observed range.
Vector interpolate(const Trajectory& trajectory, double t);

}  // namespace rkhs_ode
