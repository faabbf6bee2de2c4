#include "mdraft/rng.hpp"

#include <cmath>
#include <numbers>

#include "mdraft/error.hpp"

namespace mdraft {

double Rng::gaussian(double mean, double stddev) {
  // u1 in (0, 1] so the log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::categorical(std::span<const double> weights) {
  if (weights.empty()) throw EmptyInput("categorical: no weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("categorical: negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw Error("categorical: weights sum to zero");
  double u = uniform01() * total;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

}  // namespace mdraft
