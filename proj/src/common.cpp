#include "skh/common.hpp"

#include <cmath>

namespace skh {

double RngStream::normal() {
  // Box-Muller on two fresh uniforms; the sine branch is discarded so every
  // call advances the stream by exactly two raw draws.
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace skh
