#include "simjoin/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace simjoin {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxSeriesIter = 500;
}  // namespace

const char* to_string(Family family) {
  switch (family) {
    case Family::IndependentNormal: return "normal";
    case Family::IndependentExponential: return "exponential";
    case Family::IndependentGamma: return "gamma";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  if (name == "normal") return Family::IndependentNormal;
  if (name == "exponential" || name == "exp") return Family::IndependentExponential;
  if (name == "gamma") return Family::IndependentGamma;
  throw std::invalid_argument("unknown family: " + name);
}

int per_dim_parameter_count(Family family) {
  switch (family) {
    case Family::IndependentNormal: return 2;
    case Family::IndependentExponential: return 1;
    case Family::IndependentGamma: return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Special functions.

double lower_regularized_gamma(double a, double x) {
  if (a <= 0.0 || !(x >= 0.0)) {
    throw std::invalid_argument("lower_regularized_gamma: a > 0, x >= 0 required");
  }
  if (x == 0.0) return 0.0;
  const double log_scale = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // Series expansion of P(a, x).
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kMaxSeriesIter; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return std::min(1.0, sum * std::exp(log_scale));
  }
  // Modified Lentz continued fraction for Q(a, x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxSeriesIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_scale) * h);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::invalid_argument("normal_quantile: p in [0,1] required");
  }
  // Acklam's rational approximation followed by one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double gamma_cdf(double shape, double rate, double x) {
  if (x <= 0.0) return 0.0;
  return lower_regularized_gamma(shape, rate * x);
}

double gamma_quantile(double shape, double rate, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return kInf;
  // Wilson-Hilferty start, then safeguarded Newton on P(shape, y) = p.
  const double z = normal_quantile(p);
  const double t = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
  double y = shape * t * t * t;
  if (!(y > 0.0)) y = shape * std::exp(z / std::sqrt(shape));
  if (!(y > 0.0)) y = 1e-8;

  double lo = 0.0, hi = kInf;
  const double log_gamma_a = std::lgamma(shape);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = lower_regularized_gamma(shape, y) - p;
    if (f > 0.0) {
      hi = std::min(hi, y);
    } else {
      lo = std::max(lo, y);
    }
    const double log_pdf = (shape - 1.0) * std::log(y) - y - log_gamma_a;
    const double deriv = std::exp(log_pdf);
    double next = y;
    if (deriv > 0.0 && std::isfinite(deriv)) next = y - f / deriv;
    if (!(next > lo) || !(next < hi)) {
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * y, 1e-8);
    }
    if (std::abs(next - y) <= 1e-13 * std::max(1.0, std::abs(y))) {
      y = next;
      break;
    }
    y = next;
  }
  return y / rate;
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: x > 0 required");
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f / 132))));
}

double trigamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("trigamma: x > 0 required");
  double r = 0.0;
  while (x < 6.0) {
    r += 1.0 / (x * x);
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  return r + 1.0 / x + 0.5 * f +
         f / x * (1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f / 30)));
}

// ---------------------------------------------------------------------------
// Model evaluation.

double EfdModel::pdf(Eigen::Index d, double x) const {
  switch (family) {
    case Family::IndependentNormal: {
      const double var = param2[d];
      const double z = x - param1[d];
      return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
    }
    case Family::IndependentExponential: {
      const double rate = param1[d];
      return x < 0.0 ? 0.0 : rate * std::exp(-rate * x);
    }
    case Family::IndependentGamma: {
      if (x <= 0.0) return 0.0;
      const double shape = param1[d], rate = param2[d];
      return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) -
                      rate * x - std::lgamma(shape));
    }
  }
  return 0.0;
}

double EfdModel::cdf(Eigen::Index d, double x) const {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  switch (family) {
    case Family::IndependentNormal:
      return normal_cdf((x - param1[d]) / std::sqrt(param2[d]));
    case Family::IndependentExponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-param1[d] * x);
    case Family::IndependentGamma:
      return gamma_cdf(param1[d], param2[d], x);
  }
  return 0.0;
}

double EfdModel::quantile(Eigen::Index d, double p) const {
  switch (family) {
    case Family::IndependentNormal:
      return param1[d] + std::sqrt(param2[d]) * normal_quantile(p);
    case Family::IndependentExponential:
      return p >= 1.0 ? kInf : -std::log1p(-p) / param1[d];
    case Family::IndependentGamma:
      return gamma_quantile(param1[d], param2[d], p);
  }
  return 0.0;
}

double EfdModel::variance(Eigen::Index d) const {
  switch (family) {
    case Family::IndependentNormal:
      return param2[d];
    case Family::IndependentExponential:
      return 1.0 / (param1[d] * param1[d]);
    case Family::IndependentGamma:
      return param1[d] / (param2[d] * param2[d]);
  }
  return 0.0;
}

Eigen::Index EfdModel::spread_dimension() const {
  Eigen::Index best = 0;
  double best_var = variance(0);
  for (Eigen::Index d = 1; d < dim(); ++d) {
    const double v = variance(d);
    if (v > best_var) {
      best_var = v;
      best = d;
    }
  }
  return best;
}

void EfdModel::validate() const {
  if (param1.size() == 0) throw std::invalid_argument("model has no dimensions");
  for (Eigen::Index d = 0; d < dim(); ++d) {
    switch (family) {
      case Family::IndependentNormal:
        if (!(param2[d] > 0.0) || !std::isfinite(param2[d]) || !std::isfinite(param1[d]))
          throw std::invalid_argument("normal model needs positive finite variance");
        break;
      case Family::IndependentExponential:
        if (!(param1[d] > 0.0) || !std::isfinite(param1[d]))
          throw std::invalid_argument("exponential model needs positive rate");
        break;
      case Family::IndependentGamma:
        if (!(param1[d] > 0.0) || !(param2[d] > 0.0) || !std::isfinite(param1[d]) ||
            !std::isfinite(param2[d]))
          throw std::invalid_argument("gamma model needs positive shape and rate");
        break;
    }
  }
}

// ---------------------------------------------------------------------------
// Fitting.

namespace {

void check_data(const Eigen::MatrixXd& data) {
  if (data.rows() == 0 || data.cols() == 0) throw FitError("empty data");
}

EfdModel fit_normal(const Eigen::MatrixXd& data) {
  const auto n = static_cast<double>(data.rows());
  EfdModel m;
  m.family = Family::IndependentNormal;
  m.param1 = data.colwise().mean().array();
  m.param2 = ((data.rowwise() - m.param1.matrix().transpose()).array().square())
                 .colwise()
                 .sum() /
             n;
  for (Eigen::Index d = 0; d < m.dim(); ++d) {
    if (!(m.param2[d] > 0.0)) {
      throw FitError("degenerate variance on dimension " + std::to_string(d));
    }
  }
  return m;
}

EfdModel fit_exponential(const Eigen::MatrixXd& data) {
  if ((data.array() < 0.0).any()) {
    throw FitError("exponential support violation: negative value");
  }
  EfdModel m;
  m.family = Family::IndependentExponential;
  Eigen::ArrayXd mean = data.colwise().mean().array();
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    if (!(mean[d] > 0.0)) throw FitError("exponential fit needs positive mean");
  }
  m.param1 = mean.inverse();
  return m;
}

// Solves log(a) - digamma(a) = s by Newton iteration.
double gamma_shape_mle(double s) {
  if (!(s > 0.0)) throw FitError("degenerate data for gamma fit");
  double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  if (!(a > 0.0)) a = 0.5;
  for (int iter = 0; iter < 100; ++iter) {
    const double g = std::log(a) - digamma(a) - s;
    if (std::abs(g) < 1e-10) return a;
    const double gp = 1.0 / a - trigamma(a);
    double next = a - g / gp;
    if (!(next > 0.0)) next = 0.5 * a;
    a = next;
  }
  throw FitError("gamma shape solve did not converge");
}

EfdModel fit_gamma(const Eigen::MatrixXd& data) {
  if ((data.array() <= 0.0).any()) {
    throw FitError("gamma support violation: non-positive value");
  }
  EfdModel m;
  m.family = Family::IndependentGamma;
  const Eigen::ArrayXd mean = data.colwise().mean().array();
  const Eigen::ArrayXd mean_log = data.array().log().colwise().mean();
  m.param1.resize(data.cols());
  m.param2.resize(data.cols());
  for (Eigen::Index d = 0; d < data.cols(); ++d) {
    const double s = std::log(mean[d]) - mean_log[d];
    const double shape = gamma_shape_mle(s);
    m.param1[d] = shape;
    m.param2[d] = shape / mean[d];
  }
  return m;
}

}  // namespace

EfdModel fit_mle(const Eigen::MatrixXd& data, Family family) {
  check_data(data);
  EfdModel m;
  switch (family) {
    case Family::IndependentNormal: m = fit_normal(data); break;
    case Family::IndependentExponential: m = fit_exponential(data); break;
    case Family::IndependentGamma: m = fit_gamma(data); break;
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Grid and test statistic.

Box CellGrid::cell(Eigen::Index j, Eigen::Index space_dim) const {
  if (j < 0 || j >= cell_count()) throw std::invalid_argument("cell index out of range");
  Box b;
  b.lo = Eigen::ArrayXd::Constant(space_dim, -kInf);
  b.hi = Eigen::ArrayXd::Constant(space_dim, kInf);
  if (j > 0) b.lo[dim] = edges[j - 1];
  if (j < edges.size()) b.hi[dim] = edges[j];
  return b;
}

CellGrid equal_probability_grid(const EfdModel& model, int t) {
  const int w = per_dim_parameter_count(model.family);
  if (t < w + 2) {
    throw std::invalid_argument("cell count too small: need t >= " +
                                std::to_string(w + 2));
  }
  CellGrid grid;
  grid.dim = model.spread_dimension();
  grid.edges.resize(t - 1);
  for (int j = 1; j < t; ++j) {
    grid.edges[j - 1] = model.quantile(grid.dim, static_cast<double>(j) / t);
  }
  for (Eigen::Index j = 1; j < grid.edges.size(); ++j) {
    if (!(grid.edges[j] > grid.edges[j - 1])) {
      throw FitError("grid edges not strictly increasing");
    }
  }
  return grid;
}

double cell_probability(const EfdModel& model, const Box& cell) {
  if (cell.lo.size() != model.dim() || cell.hi.size() != model.dim()) {
    throw std::invalid_argument("cell dimension mismatch");
  }
  double p = 1.0;
  for (Eigen::Index d = 0; d < model.dim(); ++d) {
    p *= std::max(0.0, model.cdf(d, cell.hi[d]) - model.cdf(d, cell.lo[d]));
  }
  return p;
}

double cell_probability(const EfdModel& model, const CellGrid& grid, Eigen::Index j) {
  const double hi = j < grid.edges.size() ? grid.edges[j] : kInf;
  const double lo = j > 0 ? grid.edges[j - 1] : -kInf;
  return std::max(0.0, model.cdf(grid.dim, hi) - model.cdf(grid.dim, lo));
}

double test_statistic(const Eigen::MatrixXd& data, const EfdModel& model,
                      const CellGrid& grid) {
  check_data(data);
  if (grid.cell_count() < 2) {
    throw std::invalid_argument("test statistic needs at least two cells");
  }
  if (grid.dim < 0 || grid.dim >= data.cols()) {
    throw std::invalid_argument("grid dimension out of range");
  }
  const Eigen::Index t = grid.cell_count();
  std::vector<long long> counts(t, 0);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double x = data(i, grid.dim);
    // Cells are right-closed: (e_{j-1}, e_j].
    const auto it = std::lower_bound(grid.edges.data(), grid.edges.data() + grid.edges.size(), x);
    ++counts[it - grid.edges.data()];
  }
  const double n = static_cast<double>(data.rows());
  double k_star = 0.0;
  for (Eigen::Index j = 0; j < t; ++j) {
    const double q = cell_probability(model, grid, j);
    if (q <= 0.0) {
      if (counts[j] > 0) throw FitError("observations in a zero-probability cell");
      continue;
    }
    const double expected = n * q;
    const double diff = static_cast<double>(counts[j]) - expected;
    k_star += diff * diff / expected;
  }
  return k_star;
}

double chi_square_cdf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi_square_cdf: dof >= 1 required");
  if (!(x >= 0.0)) throw std::invalid_argument("chi_square_cdf: x >= 0 required");
  if (x == 0.0) return 0.0;
  return lower_regularized_gamma(0.5 * dof, 0.5 * x);
}

double confidence(double k_star, int dof) {
  if (!(k_star >= 0.0)) throw std::invalid_argument("confidence: k_star >= 0 required");
  return 1.0 - chi_square_cdf(k_star, dof);
}

FitResult fit_and_test(const Eigen::MatrixXd& data, Family family, int t) {
  if (data.rows() < 10LL * t) {
    throw FitError("not enough data: need at least 10*t observations");
  }
  FitResult r;
  r.model = fit_mle(data, family);
  const CellGrid grid = equal_probability_grid(r.model, t);
  r.k_star = test_statistic(data, r.model, grid);
  const int w = per_dim_parameter_count(family);
  r.dof = t - w - 1;
  r.confidence = confidence(r.k_star, r.dof);
  return r;
}

FitResult fit_and_test(const Eigen::MatrixXd& data, std::span<const Family> families,
                       int t) {
  if (families.empty()) throw std::invalid_argument("no candidate families");
  bool have = false;
  FitResult best;
  std::string last_error;
  for (Family f : families) {
    try {
      FitResult r = fit_and_test(data, f, t);
      if (!have || r.confidence > best.confidence) {
        best = std::move(r);
        have = true;
      }
    } catch (const FitError& e) {
      last_error = e.what();
    }
  }
  if (!have) throw FitError("no family fits: " + last_error);
  return best;
}

}  // namespace simjoin
