#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simjoin {

// Raised when a node's data cannot be fitted (empty data, support violation,
// degenerate variance, solver non-convergence, model/grid mismatch). Callers
// that can degrade gracefully catch this type.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Product of per-dimension univariate exponential-family distributions.
enum class Family { IndependentNormal, IndependentExponential, IndependentGamma };

const char* to_string(Family family);
Family family_from_string(const std::string& name);

// Scalar parameters per dimension (Normal: mean+variance, Exponential: rate,
// Gamma: shape+rate).
int per_dim_parameter_count(Family family);

struct EfdModel {
  Family family = Family::IndependentNormal;
  // Normal: param1 = mean, param2 = variance.
  // Exponential: param1 = rate, param2 unused.
  // Gamma: param1 = shape, param2 = rate.
  Eigen::ArrayXd param1;
  Eigen::ArrayXd param2;

  Eigen::Index dim() const { return param1.size(); }
  double pdf(Eigen::Index d, double x) const;
  double cdf(Eigen::Index d, double x) const;
  double quantile(Eigen::Index d, double p) const;
  double variance(Eigen::Index d) const;
  // Dimension of largest variance; ties go to the lowest index.
  Eigen::Index spread_dimension() const;
  void validate() const;
};

// Axis-aligned region; +-infinity bounds are allowed.
struct Box {
  Eigen::ArrayXd lo, hi;
};

// t cells along one dimension: (-inf, e0], (e0, e1], ..., (e_{t-2}, +inf).
struct CellGrid {
  Eigen::Index dim = 0;
  Eigen::ArrayXd edges;

  Eigen::Index cell_count() const { return edges.size() + 1; }
  Box cell(Eigen::Index j, Eigen::Index space_dim) const;
};

struct FitResult {
  EfdModel model;
  double k_star = 0.0;
  double confidence = 0.0;
  int dof = 0;
};

/// Maximum-likelihood fit of `family` to `data` (rows are observations).
/// Normal and Exponential have closed forms; Gamma solves the digamma
/// likelihood equation by Newton iteration from a moment-based start.
EfdModel fit_mle(const Eigen::MatrixXd& data, Family family);

/// Equal-probability grid of t cells under `model` along its largest-variance
/// dimension. Requires t >= w + 2 so the test keeps at least one degree of
/// freedom.
CellGrid equal_probability_grid(const EfdModel& model, int t);

double cell_probability(const EfdModel& model, const Box& cell);
double cell_probability(const EfdModel& model, const CellGrid& grid, Eigen::Index j);

/// Pearson discrepancy sum((nu_j - N q_j)^2 / (N q_j)) of `data` against
/// `model` over `grid`. A cell with zero model probability but nonzero count
/// is a model mismatch.
double test_statistic(const Eigen::MatrixXd& data, const EfdModel& model,
                      const CellGrid& grid);

/// CDF of the chi-squared distribution, i.e. the lower regularized incomplete
/// gamma function P(dof/2, x/2).
double chi_square_cdf(double x, int dof);

/// Goodness-of-fit p-value 1 - chi_square_cdf(k_star, dof).
double confidence(double k_star, int dof);

FitResult fit_and_test(const Eigen::MatrixXd& data, Family family, int t);
/// Fits every candidate family and keeps the one with maximum confidence.
FitResult fit_and_test(const Eigen::MatrixXd& data, std::span<const Family> families,
                       int t);

// Numeric kernels, exposed for reuse and testing.
double lower_regularized_gamma(double a, double x);
double normal_cdf(double z);
double normal_quantile(double p);
double gamma_cdf(double shape, double rate, double x);
double gamma_quantile(double shape, double rate, double p);
double digamma(double x);
double trigamma(double x);

}  // namespace simjoin
