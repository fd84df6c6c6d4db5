#pragma once

#include <cmath>
#include <numbers>

namespace fpmap {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Maps any angle into [0, 2pi).
inline double wrap_two_pi(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0) r += kTwoPi;
    if (r >= kTwoPi) r = 0;
    return r;
}

/// Absolute angular separation in [0, pi].
inline double angle_distance(double a, double b) {
    const double d = wrap_two_pi(a - b);
    return d > std::numbers::pi ? kTwoPi - d : d;
}

/// Accumulates unit vectors for a circular mean.
struct CircularMean {
    double sum_cos = 0;
    double sum_sin = 0;
    int count = 0;

    void add(double angle, double weight = 1.0) {
        sum_cos += weight * std::cos(angle);
        sum_sin += weight * std::sin(angle);
        ++count;
    }
    bool empty() const { return count == 0; }
    double mean() const { return wrap_two_pi(std::atan2(sum_sin, sum_cos)); }
};

}  // namespace fpmap
