#include "rkhs_ode/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rkhs_ode {

namespace {

constexpr double kMetricClamp = 1e-12;

void check_psd(const Matrix& a, const char* what) {
  if (a.size() == 0) return;
  if (a.rows() != a.cols()) throw ConfigError(std::string(what) + " must be square");
  if (!a.allFinite()) throw ConfigError(std::string(what) + " must be finite");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + a.cwiseAbs().maxCoeff())) {
    throw ConfigError(std::string(what) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(top, 1.0)) {
    throw ConfigError(std::string(what) + " must be positive semidefinite");
  }
}

double quad_form(const Matrix& metric, const Vector& delta) {
  if (metric.size() == 0) return delta.squaredNorm();
  if (metric.rows() != delta.size()) throw UsageError("kernel metric dimension mismatch");
  return delta.dot(metric * delta);
}

Vector metric_times(const Matrix& metric, const Vector& delta) {
  if (metric.size() == 0) return delta;
  return metric * delta;
}

double sinc1(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double sinc1_deriv(double x) {
  if (std::abs(x) < 1e-4) return -x / 3.0;
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

int matern_index(double p) {
  const double r = std::round(p);
  if (std::abs(p - r) > 1e-12 || r < 1.0 || r > 4.0) {
    throw ConfigError("matern p must be one of 1, 2, 3, 4 (smoothness p - 1/2)");
  }
  return static_cast<int>(r);
}

double matern_value(int p, double r) {
  switch (p) {
    case 1:
      return std::exp(-r);
    case 2: {
      const double a = std::sqrt(3.0) * r;
      return (1.0 + a) * std::exp(-a);
    }
    case 3: {
      const double a = std::sqrt(5.0) * r;
      return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    default: {
      const double a = std::sqrt(7.0) * r;
      return (1.0 + a + 2.0 * a * a / 5.0 + a * a * a / 15.0) * std::exp(-a);
    }
  }
}

// (dk/dr) / r, finite at r = 0 for p >= 2.
double matern_deriv_over_r(int p, double r) {
  switch (p) {
    case 2: {
      const double a = std::sqrt(3.0);
      return -a * a * std::exp(-a * r);
    }
    case 3: {
      const double a = std::sqrt(5.0);
      return -(a * a / 3.0) * (1.0 + a * r) * std::exp(-a * r);
    }
    case 4: {
      const double a = std::sqrt(7.0);
      return -(a * a / 15.0) * (3.0 + 3.0 * a * r + a * a * r * r) * std::exp(-a * r);
    }
    default:
      throw UnsupportedError("matern p=1 is not differentiable");
  }
}

Matrix json_matrix(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix();
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

nlohmann::json matrix_json(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Vector json_vector(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

nlohmann::json vector_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

double feature_amplitude(const FeatureMapSpec& spec) {
  return std::sqrt(2.0 / static_cast<double>(spec.n_features));
}

Vector feature_input(const FeatureMapSpec& spec, ConstVecRef x, std::optional<double> t) {
  if (x.size() != spec.state_dim) throw UsageError("feature map: state dimension mismatch");
  if (spec.time_augmented && !t) throw UsageError("feature map is time-augmented; time required");
  if (!spec.time_augmented && t) throw UsageError("feature map is autonomous; time not accepted");
  Vector in(spec.input_dim());
  in.head(spec.state_dim) = x;
  if (spec.time_augmented) in(spec.state_dim) = *t;
  return in;
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::rational_quadratic: return "rational_quadratic";
    case KernelFamily::sinc: return "sinc";
    case KernelFamily::matern: return "matern";
    case KernelFamily::laplacian: return "laplacian";
    case KernelFamily::polynomial: return "polynomial";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  for (auto f : {KernelFamily::linear, KernelFamily::gaussian, KernelFamily::rational_quadratic,
                 KernelFamily::sinc, KernelFamily::matern, KernelFamily::laplacian,
                 KernelFamily::polynomial}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown kernel family: " + name);
}

ScalarKernelSpec ScalarKernelSpec::gaussian_lengthscales(const Vector& lengthscales) {
  if ((lengthscales.array() <= 0.0).any()) throw ConfigError("lengthscales must be positive");
  ScalarKernelSpec s;
  s.family = KernelFamily::gaussian;
  s.metric = lengthscales.array().square().inverse().matrix().asDiagonal();
  return s;
}

void ScalarKernelSpec::validate() const {
  switch (family) {
    case KernelFamily::linear:
    case KernelFamily::gaussian:
      check_psd(metric, "kernel matrix A");
      break;
    case KernelFamily::rational_quadratic:
    case KernelFamily::laplacian:
      if (!(theta > 0.0)) throw ConfigError("theta must be > 0");
      break;
    case KernelFamily::sinc:
      if (!(lengthscale > 0.0)) throw ConfigError("lengthscale must be > 0");
      break;
    case KernelFamily::matern:
      if (!(lengthscale > 0.0)) throw ConfigError("lengthscale must be > 0");
      matern_index(p);
      break;
    case KernelFamily::polynomial:
      if (degree < 1) throw ConfigError("polynomial degree must be >= 1");
      if (offset < 0.0) throw ConfigError("polynomial offset must be >= 0");
      break;
  }
}

MatrixKernelSpec MatrixKernelSpec::identity(const ScalarKernelSpec& scalar, int dim) {
  return MatrixKernelSpec{scalar, Matrix::Identity(dim, dim)};
}

void MatrixKernelSpec::validate() const {
  scalar.validate();
  if (mix.size() == 0) throw ConfigError("mix matrix must be non-empty");
  check_psd(mix, "mix matrix");
}

FeatureMapSpec FeatureMapSpec::sample(int n_features, int state_dim, const Vector& lengthscales,
                                      std::uint64_t seed, bool time_augmented) {
  FeatureMapSpec spec;
  spec.n_features = n_features;
  spec.state_dim = state_dim;
  spec.time_augmented = time_augmented;
  spec.lengthscales = lengthscales;
  spec.seed = seed;
  if (n_features <= 0) throw ConfigError("n_features must be positive");
  if (lengthscales.size() != spec.input_dim()) {
    throw ConfigError("feature map needs one lengthscale per input coordinate");
  }
  if ((lengthscales.array() <= 0.0).any()) throw ConfigError("lengthscales must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  spec.frequencies.resize(n_features, spec.input_dim());
  for (int i = 0; i < n_features; ++i) {
    for (int c = 0; c < spec.input_dim(); ++c) spec.frequencies(i, c) = normal(rng) / lengthscales(c);
  }
  spec.phases.resize(n_features);
  for (int i = 0; i < n_features; ++i) spec.phases(i) = uniform(rng);
  spec.mean = Vector::Zero(n_features);
  spec.scale = Vector::Ones(n_features);
  return spec;
}

void FeatureMapSpec::validate() const {
  if (!resolved()) throw ConfigError("feature map has not been sampled");
  if (frequencies.cols() != input_dim() || phases.size() != n_features ||
      mean.size() != n_features || scale.size() != n_features) {
    throw ConfigError("feature map arrays have inconsistent sizes");
  }
  if ((scale.array() <= 0.0).any()) throw ConfigError("feature scales must be positive");
}

double scalar_eval(const ScalarKernelSpec& spec, ConstVecRef u, ConstVecRef v) {
  if (u.size() != v.size()) throw UsageError("kernel inputs differ in dimension");
  const Vector delta = u - v;
  switch (spec.family) {
    case KernelFamily::linear:
      return u.dot(metric_times(spec.metric, v));
    case KernelFamily::gaussian:
      return std::exp(-0.5 * quad_form(spec.metric, delta));
    case KernelFamily::rational_quadratic:
      return spec.theta / (delta.squaredNorm() + spec.theta);
    case KernelFamily::sinc: {
      double k = 1.0;
      for (Eigen::Index i = 0; i < delta.size(); ++i) k *= sinc1(delta(i) / spec.lengthscale);
      return k;
    }
    case KernelFamily::matern:
      return matern_value(matern_index(spec.p), delta.norm() / spec.lengthscale);
    case KernelFamily::laplacian:
      return std::exp(-delta.norm() / spec.theta);
    case KernelFamily::polynomial:
      return std::pow(u.dot(v) + spec.offset, spec.degree);
  }
  return 0.0;
}

bool is_differentiable(const ScalarKernelSpec& spec) {
  if (spec.family == KernelFamily::laplacian) return false;
  if (spec.family == KernelFamily::matern && std::round(spec.p) <= 1.0) return false;
  return true;
}

Vector scalar_grad(const ScalarKernelSpec& spec, ConstVecRef u, ConstVecRef v) {
  if (u.size() != v.size()) throw UsageError("kernel inputs differ in dimension");
  if (!is_differentiable(spec)) {
    throw UnsupportedError("kernel family " + to_string(spec.family) + " is not differentiable");
  }
  const Vector delta = u - v;
  switch (spec.family) {
    case KernelFamily::linear:
      return metric_times(spec.metric, v);
    case KernelFamily::gaussian: {
      const Vector ad = metric_times(spec.metric, delta);
      return -std::exp(-0.5 * delta.dot(ad)) * ad;
    }
    case KernelFamily::rational_quadratic: {
      const double denom = delta.squaredNorm() + spec.theta;
      return (-2.0 * spec.theta / (denom * denom)) * delta;
    }
    case KernelFamily::sinc: {
      const double l = spec.lengthscale;
      Vector g(delta.size());
      for (Eigen::Index i = 0; i < delta.size(); ++i) {
        double prod = sinc1_deriv(delta(i) / l) / l;
        for (Eigen::Index j = 0; j < delta.size(); ++j) {
          if (j != i) prod *= sinc1(delta(j) / l);
        }
        g(i) = prod;
      }
      return g;
    }
    case KernelFamily::matern: {
      const double l = spec.lengthscale;
      const double r = delta.norm() / l;
      return (matern_deriv_over_r(matern_index(spec.p), r) / (l * l)) * delta;
    }
    case KernelFamily::polynomial:
      return (spec.degree * std::pow(u.dot(v) + spec.offset, spec.degree - 1)) * Vector(v);
    case KernelFamily::laplacian:
      break;
  }
  throw UnsupportedError("gradient not available");
}

Matrix matrix_eval(const MatrixKernelSpec& spec, ConstVecRef u, ConstVecRef v) {
  return scalar_eval(spec.scalar, u, v) * spec.mix;
}

Vector feature_map(const FeatureMapSpec& spec, ConstVecRef x, std::optional<double> t) {
  const Vector in = feature_input(spec, x, t);
  return feature_matrix(spec, in);
}

Matrix feature_matrix(const FeatureMapSpec& spec, ConstMatRef inputs) {
  if (inputs.rows() != spec.input_dim()) throw UsageError("feature map: input dimension mismatch");
  Matrix arg = spec.frequencies * inputs;
  arg.colwise() += spec.phases;
  const double amp = feature_amplitude(spec);
  Matrix phi = (amp * arg.array().cos()).matrix();
  phi.colwise() -= spec.mean;
  phi.array().colwise() /= spec.scale.array();
  return phi;
}

Matrix feature_jacobian(const FeatureMapSpec& spec, ConstVecRef input) {
  if (input.size() != spec.input_dim()) throw UsageError("feature map: input dimension mismatch");
  const Vector arg = spec.frequencies * input + spec.phases;
  const double amp = feature_amplitude(spec);
  const Vector coef = (-amp * arg.array().sin() / spec.scale.array()).matrix();
  return coef.asDiagonal() * spec.frequencies.leftCols(spec.state_dim);
}

FeatureMapSpec standardize(const FeatureMapSpec& spec, ConstMatRef inputs) {
  if (inputs.cols() < 2) throw UsageError("standardization needs at least two training inputs");
  FeatureMapSpec raw = spec;
  raw.mean = Vector::Zero(spec.n_features);
  raw.scale = Vector::Ones(spec.n_features);
  const Matrix phi = feature_matrix(raw, inputs);
  FeatureMapSpec out = raw;
  out.mean = phi.rowwise().mean();
  const Matrix centered = phi.colwise() - out.mean;
  out.scale = (centered.array().square().rowwise().sum() / static_cast<double>(inputs.cols() - 1))
                  .sqrt()
                  .matrix();
  // Constant features (zero frequency) keep unit scale.
  for (Eigen::Index i = 0; i < out.scale.size(); ++i) {
    if (!(out.scale(i) > 1e-12)) out.scale(i) = 1.0;
  }
  return out;
}

double feature_kernel(const FeatureMapSpec& spec, ConstVecRef u, ConstVecRef v) {
  if (u.size() != spec.input_dim() || v.size() != spec.input_dim()) {
    throw UsageError("feature kernel: input dimension mismatch");
  }
  const double amp = feature_amplitude(spec);
  double k = 0.0;
  for (int i = 0; i < spec.n_features; ++i) {
    const double a =
        (amp * std::cos(spec.frequencies.row(i).dot(u) + spec.phases(i)) - spec.mean(i)) / spec.scale(i);
    const double b =
        (amp * std::cos(spec.frequencies.row(i).dot(v) + spec.phases(i)) - spec.mean(i)) / spec.scale(i);
    k += a * b;
  }
  return k;
}

int output_dim(const KernelSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MatrixKernelSpec>) {
          return s.output_dim();
        } else {
          return s.state_dim;
        }
      },
      spec);
}

int input_dim(const KernelSpec& spec) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MatrixKernelSpec>) {
          return static_cast<int>(s.scalar.metric.rows());
        } else {
          return s.input_dim();
        }
      },
      spec);
}

namespace {

double scalar_of(const KernelSpec& spec, ConstVecRef u, ConstVecRef v) {
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) return scalar_eval(m->scalar, u, v);
  return feature_kernel(std::get<FeatureMapSpec>(spec), u, v);
}

}  // namespace

Matrix kernel_eval(const KernelSpec& spec, ConstVecRef u, ConstVecRef v) {
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) return matrix_eval(*m, u, v);
  const auto& f = std::get<FeatureMapSpec>(spec);
  return feature_kernel(f, u, v) * Matrix::Identity(f.state_dim, f.state_dim);
}

double kernel_metric_sq(const KernelSpec& spec, ConstVecRef u, ConstVecRef v, int i) {
  if (i < 0 || i >= output_dim(spec)) throw UsageError("coordinate index out of range");
  double weight = 1.0;
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) weight = m->mix(i, i);
  const double value = weight * (scalar_of(spec, u, u) - 2.0 * scalar_of(spec, u, v) + scalar_of(spec, v, v));
  return value < kMetricClamp ? 0.0 : value;
}

Matrix scalar_cross_gram(const KernelSpec& spec, ConstMatRef xs, ConstMatRef ys) {
  Matrix g(xs.cols(), ys.cols());
  if (const auto* f = std::get_if<FeatureMapSpec>(&spec)) {
    // Same value as feature_kernel, evaluated pairwise without the batch path.
    for (Eigen::Index a = 0; a < xs.cols(); ++a) {
      for (Eigen::Index b = 0; b < ys.cols(); ++b) g(a, b) = feature_kernel(*f, xs.col(a), ys.col(b));
    }
    return g;
  }
  const auto& m = std::get<MatrixKernelSpec>(spec);
  for (Eigen::Index a = 0; a < xs.cols(); ++a) {
    for (Eigen::Index b = 0; b < ys.cols(); ++b) g(a, b) = scalar_eval(m.scalar, xs.col(a), ys.col(b));
  }
  return g;
}

Matrix scalar_gram(const KernelSpec& spec, ConstMatRef points) {
  const Eigen::Index n = points.cols();
  Matrix g(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double k = scalar_of(spec, points.col(a), points.col(b));
      g(a, b) = k;
      g(b, a) = k;
    }
  }
  return g;
}

Matrix gram(const KernelSpec& spec, ConstMatRef points) {
  if (points.cols() < 1) throw UsageError("gram needs at least one point");
  const Matrix k1 = scalar_gram(spec, points);
  const int d = output_dim(spec);
  Matrix mix = Matrix::Identity(d, d);
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) mix = m->mix;
  const Eigen::Index n = points.cols();
  Matrix g(d * n, d * n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) g.block(a * d, b * d, d, d) = k1(a, b) * mix;
  }
  return g;
}

LipschitzReport check_lipschitz(const KernelSpec& spec, int dim, const std::vector<double>& radii,
                                int n_pairs, std::uint64_t seed) {
  if (n_pairs < 100) throw UsageError("check_lipschitz needs at least 100 pairs");
  if (radii.size() < 2) throw UsageError("check_lipschitz needs at least two radii");
  if (dim <= 0) dim = input_dim(spec);
  if (dim <= 0) throw UsageError("check_lipschitz: input dimension unknown");

  LipschitzReport report;
  report.n_pairs = n_pairs;
  report.radii = radii;
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) {
    report.kernel = to_string(m->scalar.family);
  } else {
    report.kernel = "random_fourier";
  }
  const int d_out = output_dim(spec);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto sample_box = [&](double radius) {
    Vector x(dim);
    for (int c = 0; c < dim; ++c) x(c) = radius * unit(rng);
    return x;
  };
  auto max_ratio = [&](auto&& draw_pair) {
    double best = 0.0;
    for (int k = 0; k < n_pairs; ++k) {
      const auto [u, v] = draw_pair();
      const double dist = (u - v).norm();
      if (dist == 0.0) continue;
      for (int i = 0; i < d_out; ++i) {
        best = std::max(best, std::sqrt(kernel_metric_sq(spec, u, v, i)) / dist);
      }
    }
    return best;
  };
  auto log_slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    const auto n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += std::log2(xs[i]);
      my += std::log2(std::max(ys[i], 1e-300));
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double dx = std::log2(xs[i]) - mx;
      sxy += dx * (std::log2(std::max(ys[i], 1e-300)) - my);
      sxx += dx * dx;
    }
    return sxx > 0 ? sxy / sxx : 0.0;
  };

  for (double r : radii) {
    report.box_max.push_back(max_ratio([&] {
      Vector u = sample_box(r);
      Vector v = sample_box(r);
      return std::pair<Vector, Vector>(std::move(u), std::move(v));
    }));
  }
  const double r0 = radii.front();
  for (double r : radii) {
    const double sep = r0 * r0 / r;  // shrinks as r grows
    report.local_max.push_back(max_ratio([&] {
      Vector u = sample_box(r0);
      Vector v = u + sample_box(sep);
      return std::pair<Vector, Vector>(std::move(u), std::move(v));
    }));
  }
  report.ratio_trend = log_slope(radii, report.box_max);
  report.local_trend = log_slope(radii, report.local_max);
  report.max_ratio = std::max(*std::max_element(report.box_max.begin(), report.box_max.end()),
                              *std::max_element(report.local_max.begin(), report.local_max.end()));
  const double limit = std::log2(1.0 + kLipschitzGrowthTolerance);
  report.pass = std::isfinite(report.max_ratio) && report.ratio_trend <= limit &&
                report.local_trend <= limit;
  return report;
}

nlohmann::json kernel_to_json(const KernelSpec& spec) {
  nlohmann::json j;
  if (const auto* m = std::get_if<MatrixKernelSpec>(&spec)) {
    const auto& s = m->scalar;
    j["family"] = to_string(s.family);
    nlohmann::json params = nlohmann::json::object();
    switch (s.family) {
      case KernelFamily::linear:
      case KernelFamily::gaussian:
        if (s.metric.size() > 0) params["A"] = matrix_json(s.metric);
        if (s.range_fraction > 0) params["range_fraction"] = s.range_fraction;
        break;
      case KernelFamily::rational_quadratic:
      case KernelFamily::laplacian:
        params["theta"] = s.theta;
        break;
      case KernelFamily::sinc:
        params["lengthscale"] = s.lengthscale;
        break;
      case KernelFamily::matern:
        params["lengthscale"] = s.lengthscale;
        params["p"] = s.p;
        break;
      case KernelFamily::polynomial:
        params["degree"] = s.degree;
        params["offset"] = s.offset;
        break;
    }
    j["params"] = params;
    j["mix"] = matrix_json(m->mix);
    return j;
  }
  const auto& f = std::get<FeatureMapSpec>(spec);
  j["family"] = "random_fourier";
  nlohmann::json params = nlohmann::json::object();
  params["state_dim"] = f.state_dim;
  params["time_augmented"] = f.time_augmented;
  if (f.lengthscales.size() > 0) params["lengthscales"] = vector_json(f.lengthscales);
  if (f.range_fraction > 0) params["range_fraction"] = f.range_fraction;
  if (f.standardize_on_fit) params["standardize"] = true;
  if (f.resolved() && ((f.mean.array() != 0.0).any() || (f.scale.array() != 1.0).any())) {
    params["mean"] = vector_json(f.mean);
    params["scale"] = vector_json(f.scale);
  }
  j["params"] = params;
  j["n_features"] = f.n_features;
  j["seed"] = f.seed;
  return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j, int state_dim) {
  if (!j.is_object()) throw ConfigError("kernel must be a JSON object");
  if (!j.contains("family")) throw ConfigError("kernel: missing key 'family'");
  const std::string family = j.at("family").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());

  if (family == "random_fourier") {
    if (!j.contains("n_features")) throw ConfigError("kernel: missing key 'n_features'");
    const int n_features = j.at("n_features").get<int>();
    const auto seed = j.value("seed", std::uint64_t{0});
    const bool time_aug = params.value("time_augmented", false);
    int sd = params.value("state_dim", state_dim);
    if (params.contains("lengthscales")) {
      const Vector ls = json_vector(params.at("lengthscales"));
      if (sd <= 0) sd = static_cast<int>(ls.size()) - (time_aug ? 1 : 0);
      FeatureMapSpec f = FeatureMapSpec::sample(n_features, sd, ls, seed, time_aug);
      f.standardize_on_fit = params.value("standardize", false);
      if (params.contains("mean")) f.mean = json_vector(params.at("mean"));
      if (params.contains("scale")) f.scale = json_vector(params.at("scale"));
      f.validate();
      return f;
    }
    FeatureMapSpec f;
    f.n_features = n_features;
    f.state_dim = sd;
    f.time_augmented = time_aug;
    f.seed = seed;
    f.range_fraction = params.value("range_fraction", 0.2);
    f.standardize_on_fit = params.value("standardize", false);
    if (n_features <= 0) throw ConfigError("n_features must be positive");
    return f;
  }

  ScalarKernelSpec s;
  s.family = kernel_family_from_string(family);
  if (params.contains("A")) s.metric = json_matrix(params.at("A"));
  if (params.contains("lengthscales")) {
    s.metric = ScalarKernelSpec::gaussian_lengthscales(json_vector(params.at("lengthscales"))).metric;
  }
  s.theta = params.value("theta", s.theta);
  s.lengthscale = params.value("lengthscale", s.lengthscale);
  s.p = params.value("p", s.p);
  s.degree = params.value("degree", s.degree);
  s.offset = params.value("offset", s.offset);
  s.range_fraction = params.value("range_fraction", 0.0);

  Matrix mix;
  if (j.contains("mix") && !j.at("mix").is_null()) {
    mix = json_matrix(j.at("mix"));
  } else {
    int d = state_dim;
    if (d <= 0 && s.metric.size() > 0) d = static_cast<int>(s.metric.rows());
    if (d <= 0) throw ConfigError("kernel: missing key 'mix' and no dimension available");
    mix = Matrix::Identity(d, d);
  }
  MatrixKernelSpec m{s, mix};
  m.validate();
  return m;
}

}  // namespace rkhs_ode
