#include "gelwarp/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gelwarp {

BSplineBasis::BSplineBasis(double lo, double hi, std::vector<double> interior_knots)
    : lo_(lo), hi_(hi), interior_(std::move(interior_knots)) {
  if (!(hi > lo)) throw Error("B-spline basis needs lo < hi");
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    if (!(interior_[k] > lo && interior_[k] < hi))
      throw Error("interior knot lies outside the open basis range; use fewer basis functions");
    if (k > 0 && !(interior_[k] > interior_[k - 1]))
      throw Error("duplicate interior knots (heavily tied data); use fewer basis functions");
  }
  knots_.assign(order, lo);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), order, hi);
}

bool BSplineBasis::contains(double x) const {
  const double slack = 1e-12 * (hi_ - lo_);
  return x >= lo_ - slack && x <= hi_ + slack;
}

int BSplineBasis::evaluate_nonzero(double x, std::span<double, order> out) const {
  if (!contains(x)) throw Error("point " + std::to_string(x) + " outside B-spline support");
  x = std::clamp(x, lo_, hi_);
  const int n = size();
  // Knot span i with knots[i] <= x < knots[i+1]; the right end uses the last span.
  int span = n - 1;
  if (x < hi_) {
    auto it = std::upper_bound(knots_.begin() + order - 1, knots_.begin() + n + 1, x);
    span = static_cast<int>(it - knots_.begin()) - 1;
  }
  // Cox-de Boor recursion, organised over the nonzero triangle.
  std::array<double, order> left{};
  std::array<double, order> right{};
  out[0] = 1.0;
  for (int j = 1; j < order; ++j) {
    left[j] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
    right[j] = knots_[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? out[r] / denom : 0.0;
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
  return span - (order - 1);
}

std::vector<double> BSplineBasis::evaluate(double x) const {
  std::vector<double> values(static_cast<std::size_t>(size()), 0.0);
  std::array<double, order> nz{};
  const int first = evaluate_nonzero(x, nz);
  for (int k = 0; k < order; ++k) values[static_cast<std::size_t>(first + k)] = nz[static_cast<std::size_t>(k)];
  return values;
}

BSplineBasis make_basis(std::span<const double> data, int count, double lo, double hi) {
  if (count < BSplineBasis::order) throw Error("a cubic basis needs at least 4 functions");
  if (data.empty()) throw Error("cannot place basis knots without data");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> interior;
  for (int s = 1; s <= count - 4; ++s) interior.push_back(quantile_sorted(sorted, static_cast<double>(s) / (count - 3)));
  return {lo, hi, std::move(interior)};
}

BSplineBasis make_basis(std::span<const double> data, int count) {
  if (data.empty()) throw Error("cannot place basis knots without data");
  auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  return make_basis(data, count, *mn, *mx);
}

Eigen::VectorXd identity_coefficients(const BSplineBasis& basis, int grid_points) {
  const int n = basis.size();
  Eigen::MatrixXd design(grid_points, n);
  Eigen::VectorXd target(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    const double x = basis.lo() + (basis.hi() - basis.lo()) * i / (grid_points - 1);
    const auto row = basis.evaluate(x);
    for (int s = 0; s < n; ++s) design(i, s) = row[static_cast<std::size_t>(s)];
    target(i) = x;
  }
  auto qr = design.colPivHouseholderQr();
  if (qr.rank() < n) throw Error("singular design while fitting identity coefficients");
  Eigen::VectorXd beta = qr.solve(target);
  beta(0) = basis.lo();
  beta(n - 1) = basis.hi();
  return beta;
}

Eigen::MatrixXd difference_matrix(int n) {
  if (n < 2) throw Error("difference matrix needs at least two columns");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 1, n);
  for (int k = 0; k < n - 1; ++k) {
    d(k, k) = -1.0;
    d(k, k + 1) = 1.0;
  }
  return d;
}

WarpField WarpField::identity(BSplineBasis nu_basis, BSplineBasis u_basis) {
  const Eigen::VectorXd id = identity_coefficients(nu_basis);
  WarpField field{std::move(nu_basis), std::move(u_basis), {}};
  field.beta = id.replicate(1, field.u_basis.size());
  return field;
}

double WarpField::operator()(double nu, double u) const {
  std::array<double, 4> a{};
  std::array<double, 4> b{};
  const int s0 = nu_basis.evaluate_nonzero(nu, a);
  const int t0 = u_basis.evaluate_nonzero(u, b);
  double sum = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 4; ++t) sum += beta(s0 + s, t0 + t) * a[static_cast<std::size_t>(s)] * b[static_cast<std::size_t>(t)];
  return sum;
}

std::vector<double> WarpField::column(std::span<const double> nu, double u) const {
  const Eigen::VectorXd lane_coeffs = beta * Eigen::Map<const Eigen::VectorXd>(u_basis.evaluate(u).data(), u_basis.size());
  std::vector<double> out(nu.size());
  std::array<double, 4> a{};
  for (std::size_t k = 0; k < nu.size(); ++k) {
    const int s0 = nu_basis.evaluate_nonzero(nu[k], a);
    double sum = 0.0;
    for (int s = 0; s < 4; ++s) sum += lane_coeffs(s0 + s) * a[static_cast<std::size_t>(s)];
    out[k] = sum;
  }
  return out;
}

double WarpField::invert(double value, double u) const {
  if (value <= lo()) return lo();
  if (value >= hi()) return hi();
  double a = lo();
  double b = hi();
  for (int it = 0; it < 200 && b - a > 1e-14 * (hi() - lo()); ++it) {
    const double mid = 0.5 * (a + b);
    if ((*this)(mid, u) < value)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

std::string WarpField::constraint_violation() const {
  const int rows = static_cast<int>(beta.rows());
  if (rows != nu_basis.size() || beta.cols() != u_basis.size()) return "coefficient matrix has wrong shape";
  for (int t = 0; t < beta.cols(); ++t) {
    if (beta(0, t) != lo()) return "boundary: first coefficient of column " + std::to_string(t + 1) + " is not pinned";
    if (beta(rows - 1, t) != hi()) return "boundary: last coefficient of column " + std::to_string(t + 1) + " is not pinned";
    for (int s = 1; s < rows; ++s)
      if (!(beta(s, t) > beta(s - 1, t)))
        return "monotonicity: column " + std::to_string(t + 1) + " is not strictly increasing at row " +
               std::to_string(s + 1);
  }
  return {};
}

bool WarpField::satisfies_constraints() const { return constraint_violation().empty(); }

}  // namespace gelwarp
