#pragma once

// Shared aliases, error taxonomy, and the deterministic RNG used across the
// toolkit. Every stochastic ingredient (initial conditions, noise, weight
// draws, shuffles) is derived from explicit 64-bit seeds through splitmix64
// so runs are bit-reproducible and independent of platform RNG libraries.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace daa {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Err {
  ExternalSystemHasNoField,
  DimensionMismatch,
  InvalidSpec,
  NoClosedForm,
  EmptyComposite,
  NonFiniteState,
  DegenerateDimension,
  ParseError,
  InconsistentTrajectoryLengths,
  NonFiniteLoss,
  EmptyPointSet,
  DegenerateLattice,
  IncompleteGrid,
  FileError,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) { throw Error(code, what); }

inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent substream k of a root seed. Streams do not overlap for
// different k, so growing a batch never reshuffles earlier trajectories.
inline uint64_t stream_seed(uint64_t root, uint64_t k) {
  return mix64(root ^ mix64(k + 1));
}

// splitmix64 generator with uniform and Box-Muller normal variates.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1) with 53-bit resolution
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1] keeps the log finite
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace daa
