#include "hoa/spline.hpp"

#include <algorithm>

#include "hoa/error.hpp"

namespace hoa {

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> t, std::vector<double> y)
    : t_(std::move(t)), y_(std::move(y)) {
  const std::size_t n = t_.size();
  if (n < 2 || y_.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "spline needs at least two (t, y) knots");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t_[i] > t_[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "spline knots must be strictly increasing");
    }
  }
  m_.assign(n, 0.0);
  if (n < 3) return;

  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = t_[i] - t_[i - 1];
    const double h1 = t_[i + 1] - t_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = t_[i + 1] - t_[i];  // sub-diagonal entry of row i
    const double f = lower / diag[i - 1];
    diag[i] -= f * upper[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  m_[k] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i >= 1; --i) {
    m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
  }
}

std::size_t NaturalCubicSpline::segment(double x) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), x);
  const std::size_t idx = static_cast<std::size_t>(it - t_.begin());
  return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, t_.size() - 2);
}

double NaturalCubicSpline::operator()(double x) const {
  if (x <= t_.front()) return y_.front() + derivative(t_.front()) * (x - t_.front());
  if (x >= t_.back()) return y_.back() + derivative(t_.back()) * (x - t_.back());
  const std::size_t i = segment(x);
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - x) / h;
  const double b = (x - t_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double NaturalCubicSpline::derivative(double x) const {
  const double xc = std::clamp(x, t_.front(), t_.back());
  const std::size_t i = segment(xc);
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - xc) / h;
  const double b = (xc - t_[i]) / h;
  return (y_[i + 1] - y_[i]) / h +
         (-(3.0 * a * a - 1.0) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
}

double NaturalCubicSpline::second_derivative(double x) const {
  if (x < t_.front() || x > t_.back()) return 0.0;
  const std::size_t i = segment(x);
  const double h = t_[i + 1] - t_[i];
  return ((t_[i + 1] - x) * m_[i] + (x - t_[i]) * m_[i + 1]) / h;
}

}  // namespace hoa
