#pragma once

#include "aam/adaptive.hpp"
#include "aam/types.hpp"

#include <array>
#include <vector>

namespace aam {

struct ChannelSample {
  double pos = 0.0;
  double vel = 0.0;
  double acc = 0.0;
};

/// Piecewise quintic through (time, value) knots, with zero velocity and
/// acceleration at every knot. Holds the end values outside the knot range.
class QuinticTrajectory {
 public:
  QuinticTrajectory() : QuinticTrajectory({0.0, 1.0}, {0.0, 0.0}) {}

  QuinticTrajectory(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size()) throw InputError("quintic: times and values differ in length");
    if (times_.size() < 2) throw InputError("quintic: need at least two waypoints");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) throw InputError("quintic: waypoint times must be strictly increasing");
    }
  }

  /// Constant channel over [t0, t1].
  static QuinticTrajectory constant(double value, double t0 = 0.0, double t1 = 1.0) {
    return QuinticTrajectory({t0, t1}, {value, value});
  }

  ChannelSample operator()(double t) const {
    if (t <= times_.front()) return {values_.front(), 0.0, 0.0};
    if (t >= times_.back()) return {values_.back(), 0.0, 0.0};
    std::size_t i = 1;
    while (times_[i] < t) ++i;
    const double t0 = times_[i - 1];
    const double span = times_[i] - t0;
    const double delta = values_[i] - values_[i - 1];
    const double u = (t - t0) / span;
    const double u2 = u * u;
    const double u3 = u2 * u;
    // Minimum-jerk blend 10u^3 - 15u^4 + 6u^5 and its derivatives.
    return {values_[i - 1] + delta * u3 * (10.0 - 15.0 * u + 6.0 * u2),
            delta / span * 30.0 * u2 * (1.0 - 2.0 * u + u2),
            delta / (span * span) * 60.0 * u * (1.0 - 3.0 * u + 2.0 * u2)};
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// One quintic per generalized coordinate.
template <int N>
struct ReferenceTrajectory {
  std::array<QuinticTrajectory, kDof<N>> channels{};

  ReferenceSignal<N> operator()(double t) const {
    ReferenceSignal<N> r;
    for (int i = 0; i < kDof<N>; ++i) {
      const auto c = channels[i](t);
      r.pos(i) = c.pos;
      r.vel(i) = c.vel;
      r.acc(i) = c.acc;
    }
    return r;
  }
};

}  // namespace aam
