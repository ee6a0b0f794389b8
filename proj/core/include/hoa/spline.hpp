#pragma once

#include <vector>

namespace hoa {

/// Interpolating cubic spline with natural end conditions (zero second
/// derivative at both ends). Two knots give the straight line; outside the
/// knot range the spline continues linearly.
class NaturalCubicSpline {
 public:
  /// `t` strictly increasing, same length as `y`, at least two knots.
  NaturalCubicSpline(std::vector<double> t, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  const std::vector<double>& knots() const { return t_; }

 private:
  std::size_t segment(double x) const;

  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

}  // namespace hoa
