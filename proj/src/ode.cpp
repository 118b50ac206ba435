#include "rkhs_ode/ode.hpp"

#include <cmath>

namespace rkhs_ode {

namespace {

Matrix json_matrix(const nlohmann::json& j) {
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

Vector analytic_eval(const AnalyticField& a, ConstVecRef x, double t) {
  Vector out(a.dim);
  switch (a.kind) {
    case AnalyticKind::fhn: {
      const double v = x(0), w = x(1);
      out << v - v * v * v / 3.0 - w + 1.0, 0.08 * (v + 0.7 - 0.8 * w);
      return out;
    }
    case AnalyticKind::lorenz63:
      out << 10.0 * (x(1) - x(0)), x(0) * (28.0 - x(2)) - x(1), x(0) * x(1) - 8.0 / 3.0 * x(2);
      return out;
    case AnalyticKind::lorenz96: {
      const int d = a.dim;
      for (int k = 0; k < d; ++k) {
        const double next = x((k + 1) % d);
        const double prev = x((k + d - 1) % d);
        const double prev2 = x((k + d - 2) % d);
        out(k) = (next - prev2) * prev - x(k) + a.forcing;
      }
      return out;
    }
    case AnalyticKind::harmonic:
      out << x(1), std::cos(t) - 0.001 * x(1) - 10000.0 * x(0);
      return out;
    case AnalyticKind::linear:
      return a.matrix * x;
    case AnalyticKind::constant:
      return a.offset;
  }
  return out;
}

Matrix analytic_jacobian(const AnalyticField& a, ConstVecRef x) {
  Matrix j = Matrix::Zero(a.dim, a.dim);
  switch (a.kind) {
    case AnalyticKind::fhn:
      j << 1.0 - x(0) * x(0), -1.0, 0.08, -0.064;
      return j;
    case AnalyticKind::lorenz63:
      j << -10.0, 10.0, 0.0, 28.0 - x(2), -1.0, -x(0), x(1), x(0), -8.0 / 3.0;
      return j;
    case AnalyticKind::lorenz96: {
      const int d = a.dim;
      for (int k = 0; k < d; ++k) {
        const int kn = (k + 1) % d, kp = (k + d - 1) % d, kp2 = (k + d - 2) % d;
        j(k, kn) += x(kp);
        j(k, kp2) -= x(kp);
        j(k, kp) += x(kn) - x(kp2);
        j(k, k) -= 1.0;
      }
      return j;
    }
    case AnalyticKind::harmonic:
      j << 0.0, 1.0, -10000.0, -0.001;
      return j;
    case AnalyticKind::linear:
      return a.matrix;
    case AnalyticKind::constant:
      return j;
  }
  return j;
}

Vector kernel_input(ConstVecRef x, std::optional<double> t, bool time_augmented) {
  if (!time_augmented) return x;
  Vector in(x.size() + 1);
  in.head(x.size()) = x;
  in(x.size()) = *t;
  return in;
}

void require_time(const VectorField& f, std::optional<double> t) {
  if (!f.autonomous() && !t) throw UsageError("non-autonomous field evaluated without time");
}

}  // namespace

std::string to_string(AnalyticKind kind) {
  switch (kind) {
    case AnalyticKind::fhn: return "fhn";
    case AnalyticKind::lorenz63: return "lorenz63";
    case AnalyticKind::lorenz96: return "lorenz96";
    case AnalyticKind::harmonic: return "harmonic";
    case AnalyticKind::linear: return "linear";
    case AnalyticKind::constant: return "constant";
  }
  return "unknown";
}

AnalyticKind analytic_kind_from_string(const std::string& name) {
  for (auto k : {AnalyticKind::fhn, AnalyticKind::lorenz63, AnalyticKind::lorenz96,
                 AnalyticKind::harmonic, AnalyticKind::linear, AnalyticKind::constant}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown analytic system: " + name);
}

VectorField::VectorField(Form form, std::shared_ptr<const VectorField> base)
    : form_(std::move(form)), base_(std::move(base)) {
  validate();
}

VectorField VectorField::zero(int dim) { return constant(Vector::Zero(dim)); }

VectorField VectorField::constant(const Vector& c) {
  AnalyticField a;
  a.kind = AnalyticKind::constant;
  a.dim = static_cast<int>(c.size());
  a.offset = c;
  return VectorField(a);
}

VectorField VectorField::linear(const Matrix& m) {
  AnalyticField a;
  a.kind = AnalyticKind::linear;
  a.dim = static_cast<int>(m.rows());
  a.matrix = m;
  return VectorField(a);
}

namespace {

AnalyticField system_field(AnalyticKind kind, int dim, double forcing = 8.0) {
  AnalyticField a;
  a.kind = kind;
  a.dim = dim;
  a.forcing = forcing;
  return a;
}

}  // namespace

VectorField VectorField::fhn() { return VectorField(system_field(AnalyticKind::fhn, 2)); }
VectorField VectorField::lorenz63() { return VectorField(system_field(AnalyticKind::lorenz63, 3)); }
VectorField VectorField::lorenz96(int dim, double forcing) {
  return VectorField(system_field(AnalyticKind::lorenz96, dim, forcing));
}
VectorField VectorField::harmonic() { return VectorField(system_field(AnalyticKind::harmonic, 2)); }

int VectorField::dim() const {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          return f.dim;
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          return static_cast<int>(f.weights.rows());
        } else {
          return static_cast<int>(f.coefficients.cols());
        }
      },
      form_);
}

bool VectorField::autonomous() const {
  const bool own = std::visit(
      [](const auto& f) -> bool {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          return f.kind != AnalyticKind::harmonic;
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          return !f.time_augmented;
        } else {
          return !f.features.time_augmented;
        }
      },
      form_);
  return own && (!base_ || base_->autonomous());
}

bool VectorField::differentiable() const {
  bool own = true;
  if (const auto* r = std::get_if<RepresenterField>(&form_)) own = is_differentiable(r->kernel.scalar);
  return own && (!base_ || base_->differentiable());
}

void VectorField::validate() const {
  std::visit(
      [](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          if (f.dim <= 0) throw ConfigError("analytic field needs a positive dimension");
          if (f.kind == AnalyticKind::fhn && f.dim != 2) throw ConfigError("fhn is two-dimensional");
          if (f.kind == AnalyticKind::harmonic && f.dim != 2) throw ConfigError("harmonic is two-dimensional");
          if (f.kind == AnalyticKind::lorenz63 && f.dim != 3) throw ConfigError("lorenz63 is three-dimensional");
          if (f.kind == AnalyticKind::lorenz96 && f.dim < 4) throw ConfigError("lorenz96 needs dim >= 4");
          if (f.kind == AnalyticKind::linear && (f.matrix.rows() != f.dim || f.matrix.cols() != f.dim)) {
            throw ConfigError("linear field matrix must be dim x dim");
          }
          if (f.kind == AnalyticKind::constant && f.offset.size() != f.dim) {
            throw ConfigError("constant field vector has the wrong size");
          }
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          if (f.centers.cols() != f.weights.cols()) {
            throw ConfigError("representer field: centers and weights differ in count");
          }
          if (f.weights.rows() != f.kernel.output_dim()) {
            throw ConfigError("representer field: weight dimension differs from kernel output");
          }
          const Eigen::Index expect = f.weights.rows() + (f.time_augmented ? 1 : 0);
          if (f.centers.cols() > 0 && f.centers.rows() != expect) {
            throw ConfigError("representer field: center dimension mismatch");
          }
        } else {
          if (f.coefficients.rows() != f.features.n_features) {
            throw ConfigError("explicit field: coefficient rows must equal n_features");
          }
          if (f.coefficients.cols() != f.features.state_dim) {
            throw ConfigError("explicit field: coefficient columns must equal state dimension");
          }
        }
      },
      form_);
  if (base_ && base_->dim() != dim()) throw ConfigError("base field dimension mismatch");
}

Vector eval_field(const VectorField& f, ConstVecRef x, std::optional<double> t) {
  if (x.size() != f.dim()) throw UsageError("field evaluated at a point of the wrong dimension");
  require_time(f, t);
  Vector out = std::visit(
      [&](const auto& form) -> Vector {
        using T = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          return analytic_eval(form, x, t.value_or(0.0));
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          const Vector in = kernel_input(x, t, form.time_augmented);
          Vector acc = Vector::Zero(form.weights.rows());
          for (Eigen::Index l = 0; l < form.centers.cols(); ++l) {
            acc += scalar_eval(form.kernel.scalar, in, form.centers.col(l)) * form.weights.col(l);
          }
          return form.kernel.mix * acc;
        } else {
          const Vector phi = form.features.time_augmented ? feature_map(form.features, x, t)
                                                          : feature_map(form.features, x);
          return form.coefficients.transpose() * phi;
        }
      },
      f.form());
  if (f.base()) out += eval_field(*f.base(), x, t);
  return out;
}

Matrix field_jacobian(const VectorField& f, ConstVecRef x, std::optional<double> t) {
  if (x.size() != f.dim()) throw UsageError("field evaluated at a point of the wrong dimension");
  require_time(f, t);
  const int d = f.dim();
  Matrix out = std::visit(
      [&](const auto& form) -> Matrix {
        using T = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          return analytic_jacobian(form, x);
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          const Vector in = kernel_input(x, t, form.time_augmented);
          Matrix acc = Matrix::Zero(d, d);
          for (Eigen::Index l = 0; l < form.centers.cols(); ++l) {
            const Vector g = scalar_grad(form.kernel.scalar, in, form.centers.col(l));
            acc += form.weights.col(l) * g.head(d).transpose();
          }
          return form.kernel.mix * acc;
        } else {
          const Vector in = kernel_input(x, t, form.features.time_augmented);
          return form.coefficients.transpose() * feature_jacobian(form.features, in);
        }
      },
      f.form());
  if (f.base()) out += field_jacobian(*f.base(), x, t);
  return out;
}

void eval_field_batch(const VectorField& f, ConstMatRef states, const Vector* times, Matrix& values,
                      std::vector<Matrix>* jacobians) {
  const int d = f.dim();
  const Eigen::Index n = states.cols();
  if (states.rows() != d) throw UsageError("batch evaluation: state dimension mismatch");
  if (!f.autonomous() && (!times || times->size() != n)) {
    throw UsageError("non-autonomous field evaluated without times");
  }
  auto time_of = [&](Eigen::Index p) -> std::optional<double> {
    if (times) return (*times)(p);
    return std::nullopt;
  };

  if (const auto* ex = std::get_if<ExplicitField>(&f.form())) {
    const FeatureMapSpec& fm = ex->features;
    Matrix inputs(fm.input_dim(), n);
    inputs.topRows(d) = states;
    if (fm.time_augmented) inputs.row(d) = times->transpose();
    Matrix arg = fm.frequencies * inputs;
    arg.colwise() += fm.phases;
    const double amp = std::sqrt(2.0 / static_cast<double>(fm.n_features));
    Matrix phi = (amp * arg.array().cos()).matrix();
    phi.colwise() -= fm.mean;
    phi.array().colwise() /= fm.scale.array();
    values.noalias() = ex->coefficients.transpose() * phi;
    if (jacobians) {
      // J_p(a, b) = sum_i C(i, a) s_i(p) omega(i, b) with s = -amp sin(arg) / scale.
      Matrix s = (-amp * arg.array().sin()).matrix();
      s.array().colwise() /= fm.scale.array();
      Matrix g(fm.n_features, d * d);
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          g.col(a * d + b) = ex->coefficients.col(a).cwiseProduct(fm.frequencies.col(b));
        }
      }
      const Matrix flat = s.transpose() * g;  // n x d^2
      jacobians->resize(static_cast<std::size_t>(n));
      for (Eigen::Index p = 0; p < n; ++p) {
        Matrix& jp = (*jacobians)[static_cast<std::size_t>(p)];
        jp.resize(d, d);
        for (int a = 0; a < d; ++a) {
          for (int b = 0; b < d; ++b) jp(a, b) = flat(p, a * d + b);
        }
      }
    }
    if (f.base()) {
      Matrix base_values;
      std::vector<Matrix> base_jac;
      eval_field_batch(*f.base(), states, times, base_values, jacobians ? &base_jac : nullptr);
      values += base_values;
      if (jacobians) {
        for (Eigen::Index p = 0; p < n; ++p) (*jacobians)[p] += base_jac[p];
      }
    }
    return;
  }

  values.resize(d, n);
  if (jacobians) jacobians->resize(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) {
    values.col(p) = eval_field(f, states.col(p), time_of(p));
    if (jacobians) (*jacobians)[p] = field_jacobian(f, states.col(p), time_of(p));
  }
}

Matrix euler_integrate(const VectorField& f, ConstVecRef x0, double t0, double h, int steps) {
  if (!(h > 0.0)) throw UsageError("Euler step h must be > 0");
  if (steps < 0) throw UsageError("Euler step count must be >= 0");
  if (x0.size() != f.dim()) throw UsageError("initial condition has the wrong dimension");
  Matrix path(f.dim(), steps + 1);
  path.col(0) = x0;
  if (!x0.allFinite()) throw DivergenceError("non-finite initial state", 0);
  const bool autonomous = f.autonomous();
  for (int l = 0; l < steps; ++l) {
    const double t = t0 + l * h;
    const Vector dx = autonomous ? eval_field(f, path.col(l)) : eval_field(f, path.col(l), t);
    path.col(l + 1) = path.col(l) + h * dx;
    if (!path.col(l + 1).allFinite()) {
      throw DivergenceError("Euler integration diverged at step " + std::to_string(l + 1), l + 1);
    }
  }
  return path;
}

Dataset simulate_dataset(const VectorField& system, ConstMatRef initial_conditions, double t0,
                         double dt_obs, int n_obs, int substeps, int threads) {
  if (substeps < 1) throw UsageError("integrator_substeps must be >= 1");
  if (n_obs < 1) throw UsageError("n_obs must be >= 1");
  if (!(dt_obs > 0.0)) throw UsageError("observation spacing must be > 0");
  if (initial_conditions.rows() != system.dim()) {
    throw UsageError("initial conditions have the wrong dimension");
  }
  const Eigen::Index n = initial_conditions.cols();
  Dataset ds;
  ds.dim = system.dim();
  ds.trajectories.resize(static_cast<std::size_t>(n));
  const double h = dt_obs / substeps;
  const bool autonomous = system.autonomous();
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    Trajectory tr;
    tr.id = std::to_string(i);
    tr.times.resize(n_obs);
    tr.values.resize(system.dim(), n_obs);
    Vector x = initial_conditions.col(static_cast<Eigen::Index>(i));
    for (int l = 0; l < n_obs; ++l) {
      tr.times(l) = t0 + l * dt_obs;
      tr.values.col(l) = x;
      if (l + 1 == n_obs) break;
      for (int s = 0; s < substeps; ++s) {
        const double t = tr.times(l) + s * h;
        x += h * (autonomous ? eval_field(system, x) : eval_field(system, x, t));
      }
      if (!x.allFinite()) {
        throw DivergenceError("simulation of trajectory " + tr.id + " diverged at observation " +
                                  std::to_string(l + 1),
                              l + 1);
      }
    }
    ds.trajectories[i] = std::move(tr);
  });
  ds.horizon = 0.0;
  return ds;
}

VectorField analytic_system(const std::string& name, int dim, double forcing) {
  if (name == "fhn") return VectorField::fhn();
  if (name == "lorenz63") return VectorField::lorenz63();
  if (name == "lorenz96") return VectorField::lorenz96(dim, forcing);
  if (name == "harmonic" || name == "harmonic_forced") return VectorField::harmonic();
  throw ConfigError("unknown system '" + name + "' (expected fhn | lorenz63 | lorenz96 | harmonic)");
}

nlohmann::json field_to_json(const VectorField& f) {
  nlohmann::json j;
  std::visit(
      [&](const auto& form) {
        using T = std::decay_t<decltype(form)>;
        if constexpr (std::is_same_v<T, AnalyticField>) {
          j["form"] = "analytic";
          j["name"] = to_string(form.kind);
          j["dim"] = form.dim;
          if (form.kind == AnalyticKind::lorenz96) j["forcing"] = form.forcing;
          if (form.kind == AnalyticKind::linear) j["matrix"] = matrix_json(form.matrix);
          if (form.kind == AnalyticKind::constant) {
            j["offset"] = std::vector<double>(form.offset.data(), form.offset.data() + form.offset.size());
          }
        } else if constexpr (std::is_same_v<T, RepresenterField>) {
          j["form"] = "representer";
          j["kernel"] = kernel_to_json(form.kernel);
          j["time_augmented"] = form.time_augmented;
          j["centers"] = matrix_json(form.centers.transpose());
          j["weights"] = matrix_json(form.weights.transpose());
        } else {
          j["form"] = "explicit";
          j["kernel"] = kernel_to_json(form.features);
          j["coefficients"] = matrix_json(form.coefficients);
        }
      },
      f.form());
  j["base"] = f.base() ? field_to_json(*f.base()) : nlohmann::json();
  return j;
}

VectorField field_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("form")) throw ConfigError("field JSON: missing key 'form'");
  std::shared_ptr<const VectorField> base;
  if (j.contains("base") && !j.at("base").is_null()) {
    base = std::make_shared<const VectorField>(field_from_json(j.at("base")));
  }
  const std::string form = j.at("form").get<std::string>();
  if (form == "analytic") {
    AnalyticField a;
    a.kind = analytic_kind_from_string(j.at("name").get<std::string>());
    a.dim = j.at("dim").get<int>();
    a.forcing = j.value("forcing", 8.0);
    if (j.contains("matrix")) a.matrix = json_matrix(j.at("matrix"));
    if (j.contains("offset")) {
      const auto v = j.at("offset").get<std::vector<double>>();
      a.offset = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return VectorField(a, base);
  }
  if (form == "representer") {
    RepresenterField r;
    r.kernel = std::get<MatrixKernelSpec>(kernel_from_json(j.at("kernel")));
    r.time_augmented = j.value("time_augmented", false);
    r.centers = json_matrix(j.at("centers")).transpose();
    r.weights = json_matrix(j.at("weights")).transpose();
    if (r.centers.size() == 0) {
      r.centers.resize(r.kernel.output_dim() + (r.time_augmented ? 1 : 0), 0);
      r.weights.resize(r.kernel.output_dim(), 0);
    }
    return VectorField(r, base);
  }
  if (form == "explicit") {
    ExplicitField e;
    e.features = std::get<FeatureMapSpec>(kernel_from_json(j.at("kernel")));
    e.coefficients = json_matrix(j.at("coefficients"));
    return VectorField(e, base);
  }
  throw ConfigError("field JSON: unknown form '" + form + "'");
}

}  // namespace rkhs_ode
