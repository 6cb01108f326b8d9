#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "profcast/errors.hpp"

namespace profcast {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive a stream seed from a master seed and a label; used so that every
// pipeline stage consumes a distinct, reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  return splitmix64(s);
}

// Deterministic RNG. All samplers are implemented here (not via std::
// distributions) so that identical seeds give identical draws regardless of
// standard-library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw numeric_error("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  // Marsaglia polar method with cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0) throw numeric_error("gamma: nonpositive parameter");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

  double student_t(double df) {
    if (df <= 0.0) throw numeric_error("student_t: nonpositive df");
    return normal() / std::sqrt(chi_squared(df) / df);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  // Multivariate normal given the lower Cholesky factor of the covariance.
  Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_chol_lower) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal();
    return mean + cov_chol_lower * z;
  }

  // Bartlett decomposition; `scale` is the Wishart scale matrix V.
  Eigen::MatrixXd wishart(const Eigen::MatrixXd& scale, double df) {
    const Eigen::Index p = scale.rows();
    if (df < static_cast<double>(p)) throw numeric_error("wishart: df below dimension");
    Eigen::LLT<Eigen::MatrixXd> llt(scale);
    if (llt.info() != Eigen::Success) throw numeric_error("wishart: scale not positive definite");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      a(i, i) = std::sqrt(chi_squared(df - static_cast<double>(i)));
      for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
    }
    const Eigen::MatrixXd la = llt.matrixL() * a;
    return la * la.transpose();
  }

  // IW(R, nu): draw W ~ Wishart(R^{-1}, nu) and invert.
  Eigen::MatrixXd inverse_wishart(const Eigen::MatrixXd& scale, double df) {
    const Eigen::MatrixXd w = wishart(scale.inverse(), df);
    return w.inverse();
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace profcast
