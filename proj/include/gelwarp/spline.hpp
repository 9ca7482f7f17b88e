#pragma once

/// \file
/// Cubic B-spline machinery for the two-dimensional warp
///
///   S(nu, u) = sum_s sum_t beta[s, t] * B1_s(nu) * B2_t(u),
///
/// where B1 spans the landmark direction and B2 the lane direction. The warp
/// is monotone in nu and pinned at both ends whenever every column of beta is
/// strictly increasing with first and last rows equal to the domain bounds.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "gelwarp/core.hpp"

namespace gelwarp {

/// Clamped cubic B-spline basis (order 4, intercept included) on [lo, hi].
class BSplineBasis {
public:
  static constexpr int order = 4;

  BSplineBasis() = default;
  BSplineBasis(double lo, double hi, std::vector<double> interior_knots);

  int size() const { return static_cast<int>(interior_.size()) + order; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& interior_knots() const { return interior_; }
  /// Full knot vector with boundary knots repeated `order` times.
  const std::vector<double>& knots() const { return knots_; }

  bool contains(double x) const;
  /// Values of all basis functions at x. Throws outside [lo, hi].
  std::vector<double> evaluate(double x) const;
  /// Writes the four possibly-nonzero values into `out` and returns the index
  /// of the first one.
  int evaluate_nonzero(double x, std::span<double, order> out) const;

private:
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> interior_;
  std::vector<double> knots_;
};

/// Basis with `count` functions whose count-4 interior knots sit at the
/// s/(count-3) quantiles of `data`, s = 1..count-4, on the range [lo, hi].
BSplineBasis make_basis(std::span<const double> data, int count, double lo, double hi);
/// Same, with the range taken from the data.
BSplineBasis make_basis(std::span<const double> data, int count);

/// Least-squares coefficients reproducing x -> x on a dense grid. The end
/// coefficients equal lo and hi exactly.
Eigen::VectorXd identity_coefficients(const BSplineBasis& basis, int grid_points = 1000);

/// (n - 1) x n first-difference operator: row k has -1 at k and +1 at k + 1.
Eigen::MatrixXd difference_matrix(int n);

/// Tensor-product warp S(nu, u) with coefficients beta (T_nu x T_u).
struct WarpField {
  BSplineBasis nu_basis;
  BSplineBasis u_basis;
  Eigen::MatrixXd beta;

  /// Coefficients equal to the identity column in every lane direction.
  static WarpField identity(BSplineBasis nu_basis, BSplineBasis u_basis);

  double lo() const { return nu_basis.lo(); }
  double hi() const { return nu_basis.hi(); }

  double operator()(double nu, double u) const;
  /// Values S(nu_k, u) for many nu at one lane position.
  std::vector<double> column(std::span<const double> nu, double u) const;
  /// Solves S(x, u) = value for x by bisection; value must lie in [lo, hi].
  double invert(double value, double u) const;

  /// True when the boundary rows are pinned and every column strictly increases.
  bool satisfies_constraints() const;
  /// Description of the first violated constraint, empty if none.
  std::string constraint_violation() const;
};

}  // namespace gelwarp
