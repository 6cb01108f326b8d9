#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "profcast/errors.hpp"
#include "profcast/panel.hpp"
#include "profcast/rng.hpp"
#include "profcast/stats.hpp"

namespace profcast::bma {

// A model is a predictor subset encoded as a bitmask.
struct ModelId {
  std::uint64_t mask = 0;

  int size() const { return __builtin_popcountll(mask); }
  bool contains(int j) const { return (mask >> j) & 1ULL; }
};

enum class GPriorKind { uip, ric, bric, hq, hyper_g };

struct GPriorSpec {
  GPriorKind kind = GPriorKind::uip;
  double hyper_alpha = 4.0;  // hyper-g: Beta(1, alpha/2 - 1) on g/(1+g)

  // Fixed-g resolution given sample size and candidate-predictor count.
  double resolve_g(int n, int q_total) const {
    switch (kind) {
      case GPriorKind::uip: return static_cast<double>(n);
      case GPriorKind::ric: return static_cast<double>(q_total) * static_cast<double>(q_total);
      case GPriorKind::bric:
        return std::max(static_cast<double>(n),
                        static_cast<double>(q_total) * static_cast<double>(q_total));
      case GPriorKind::hq: {
        const double ln_n = std::log(static_cast<double>(n));
        return ln_n * ln_n * ln_n;
      }
      case GPriorKind::hyper_g:
        throw numeric_error("hyper-g has no fixed g");
    }
    throw numeric_error("unknown g-prior kind");
  }

  static GPriorSpec fixed(GPriorKind k) { return GPriorSpec{k, 4.0}; }
  static GPriorSpec hyper(double alpha) {
    if (alpha <= 2.0) throw config_error("hyper-g alpha must exceed 2");
    return GPriorSpec{GPriorKind::hyper_g, alpha};
  }
};

inline const char* to_string(GPriorKind k) {
  switch (k) {
    case GPriorKind::uip: return "uip";
    case GPriorKind::ric: return "ric";
    case GPriorKind::bric: return "bric";
    case GPriorKind::hq: return "hq";
    case GPriorKind::hyper_g: return "hyper_g";
  }
  return "?";
}

enum class ModelPriorKind { uniform, binomial, beta_binomial };

struct ModelPriorSpec {
  ModelPriorKind kind = ModelPriorKind::uniform;
  double theta = 0.5;  // binomial inclusion probability
  double a = 1.0;      // beta-binomial hyperparameters
  double b = 1.0;
};

inline const char* to_string(ModelPriorKind k) {
  switch (k) {
    case ModelPriorKind::uniform: return "uniform";
    case ModelPriorKind::binomial: return "binomial";
    case ModelPriorKind::beta_binomial: return "beta_binomial";
  }
  return "?";
}

inline double model_prior_log(ModelId model, const ModelPriorSpec& spec, int q_total) {
  const int q = model.size();
  if (q > q_total) throw numeric_error("model size exceeds predictor count");
  switch (spec.kind) {
    case ModelPriorKind::uniform:
      return -static_cast<double>(q_total) * std::log(2.0);
    case ModelPriorKind::binomial: {
      if (!(spec.theta > 0.0 && spec.theta < 1.0))
        throw config_error("binomial model prior: theta outside (0,1)");
      return q * std::log(spec.theta) + (q_total - q) * std::log(1.0 - spec.theta);
    }
    case ModelPriorKind::beta_binomial: {
      if (!(spec.a > 0.0 && spec.b > 0.0))
        throw config_error("beta-binomial model prior: a, b must be positive");
      return lbeta(spec.a + q, spec.b + q_total - q) - lbeta(spec.a, spec.b);
    }
  }
  throw numeric_error("unknown model prior kind");
}

namespace detail {

// Gauss-Legendre nodes/weights on [0,1], computed once per order.
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre_01(int order) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  std::vector<double> x(order), w(order);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (z * p0 - p1) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p0 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    // map from [-1,1] to [0,1]
    x[i] = 0.5 * (1.0 - z);
    x[order - 1 - i] = 0.5 * (1.0 + z);
    w[i] = w[order - 1 - i] = 1.0 / ((1.0 - z * z) * pp * pp);
  }
  auto res = cache.emplace(order, std::make_pair(std::move(x), std::move(w)));
  return res.first->second;
}

}  // namespace detail

// Sufficient statistics for the Gaussian linear model space over one outcome
// vector. Centers y and the columns once; all per-model quantities derive
// from X'X, X'y and y'y restricted to the model's columns.
class BmaProblem {
 public:
  BmaProblem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    if (y.size() != X.rows()) throw data_error("BmaProblem: y/X row mismatch");
    n_ = static_cast<int>(y.size());
    q_total_ = static_cast<int>(X.cols());
    if (q_total_ > 63) throw config_error("BmaProblem: more than 63 predictors unsupported");
    ybar_ = y.mean();
    const Eigen::VectorXd yc = y.array() - ybar_;
    yty_ = yc.squaredNorm();
    if (yty_ <= 0.0) throw data_error("BmaProblem: outcome has zero variance");
    Eigen::MatrixXd xc = X;
    for (int j = 0; j < q_total_; ++j) xc.col(j).array() -= X.col(j).mean();
    xtx_ = xc.transpose() * xc;
    xty_ = xc.transpose() * yc;
  }

  int n() const { return n_; }
  int q_total() const { return q_total_; }
  double ybar() const { return ybar_; }
  double yty() const { return yty_; }

  struct ModelFit {
    double r2 = 0.0;
    Eigen::VectorXd beta_ols;  // per included column, in mask bit order
    Eigen::MatrixXd xtx_inv;
    std::vector<int> cols;
  };

  // OLS on the model's columns; nullopt when the submatrix is rank deficient
  // or the model is too large for the sample.
  std::optional<ModelFit> fit(ModelId model) const {
    ModelFit f;
    for (int j = 0; j < q_total_; ++j)
      if (model.contains(j)) f.cols.push_back(j);
    const int q = static_cast<int>(f.cols.size());
    if (q == 0) {
      f.r2 = 0.0;
      return f;
    }
    if (q >= n_ - 1) return std::nullopt;
    Eigen::MatrixXd sub(q, q);
    Eigen::VectorXd sub_y(q);
    for (int a = 0; a < q; ++a) {
      sub_y(a) = xty_(f.cols[a]);
      for (int b = 0; b < q; ++b) sub(a, b) = xtx_(f.cols[a], f.cols[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success) return std::nullopt;
    f.beta_ols = llt.solve(sub_y);
    f.xtx_inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
    f.r2 = f.beta_ols.dot(sub_y) / yty_;
    if (f.r2 > 1.0 - 1e-12) f.r2 = 1.0 - 1e-12;
    if (f.r2 < 0.0) f.r2 = 0.0;
    return f;
  }

  // Data-independent constant of the g-prior marginal likelihood.
  double base_log_marginal() const {
    return std::lgamma(0.5 * (n_ - 1)) - 0.5 * (n_ - 1) * std::log(kPi) -
           0.5 * std::log(static_cast<double>(n_)) - 0.5 * (n_ - 1) * std::log(yty_);
  }

  double log_marginal_fixed_g(int q, double r2, double g) const {
    return base_log_marginal() + 0.5 * (n_ - 1 - q) * std::log1p(g) -
           0.5 * (n_ - 1) * std::log1p(g * (1.0 - r2));
  }

  // Hyper-g marginal: Beta(1, alpha/2 - 1) prior on the shrinkage z = g/(1+g)
  // integrates to (alpha-2) * Int_0^1 u^{alpha+q-3} (1 - r2 + r2 u^2)^{-(n-1)/2} du
  // after z = 1 - u^2. A power substitution keeps the u->0 endpoint polynomial
  // before applying the 61-point Gauss-Legendre rule.
  double log_marginal_hyper_g(int q, double r2, double alpha, int order = 61) const {
    const double expo = alpha + q - 2.0;
    const double p = expo < 3.0 ? 3.0 / expo : 1.0;
    const auto& [nodes, weights] = detail::gauss_legendre_01(order);
    const double half_nm1 = 0.5 * (n_ - 1);
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = nodes[i];
      const double u = std::pow(v, p);
      const double log_f = (p * expo - 1.0) * std::log(v) -
                           half_nm1 * std::log((1.0 - r2) + r2 * u * u) +
                           std::log(p * weights[i]);
      logs[i] = log_f;
      max_log = std::max(max_log, log_f);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - max_log);
    return base_log_marginal() + std::log(alpha - 2.0) + max_log + std::log(acc);
  }

  // Posterior mean of the shrinkage factor under hyper-g, by the same rule.
  double hyper_g_mean_shrinkage(int q, double r2, double alpha, int order = 61) const {
    const double expo = alpha + q - 2.0;
    const double p = expo < 3.0 ? 3.0 / expo : 1.0;
    const auto& [nodes, weights] = detail::gauss_legendre_01(order);
    const double half_nm1 = 0.5 * (n_ - 1);
    double num = 0.0, den = 0.0;
    // Stabilize with the largest log integrand value.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(nodes.size()), zs(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = nodes[i];
      const double u = std::pow(v, p);
      zs[i] = 1.0 - u * u;
      logs[i] = (p * expo - 1.0) * std::log(v) -
                half_nm1 * std::log((1.0 - r2) + r2 * u * u) + std::log(p * weights[i]);
      max_log = std::max(max_log, logs[i]);
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double w = std::exp(logs[i] - max_log);
      den += w;
      num += w * zs[i];
    }
    return num / den;
  }

  // Full log marginal likelihood of the model under the given g-prior.
  // Throws on rank-deficient submatrices or q >= n-1.
  double log_marginal(ModelId model, const GPriorSpec& gspec) const {
    auto f = fit(model);
    if (!f.has_value())
      throw numeric_error("log_marginal: rank-deficient submatrix or q >= N-1");
    const int q = static_cast<int>(f->cols.size());
    if (gspec.kind == GPriorKind::hyper_g)
      return log_marginal_hyper_g(q, f->r2, gspec.hyper_alpha);
    return log_marginal_fixed_g(q, f->r2, gspec.resolve_g(n_, q_total_));
  }

  // Shrinkage factor applied to OLS coefficients under the given prior.
  double shrinkage(ModelId model, const GPriorSpec& gspec) const {
    if (gspec.kind == GPriorKind::hyper_g) {
      auto f = fit(model);
      if (!f.has_value()) throw numeric_error("shrinkage: singular model");
      return hyper_g_mean_shrinkage(model.size(), f->r2, gspec.hyper_alpha);
    }
    const double g = gspec.resolve_g(n_, q_total_);
    return g / (1.0 + g);
  }

 private:
  int n_ = 0;
  int q_total_ = 0;
  double ybar_ = 0.0;
  double yty_ = 0.0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
};

inline double log_marginal_likelihood(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                      ModelId model, const GPriorSpec& gspec) {
  return BmaProblem(y, X).log_marginal(model, gspec);
}

enum class Method { enumeration, bd_mcmc };

// Everything needed to rebuild a stored model's posterior and predictive.
struct ModelRecord {
  std::uint64_t mask = 0;
  int size = 0;
  double log_marginal = 0.0;
  double pmp = 0.0;            // renormalized over the stored set
  double empirical_freq = 0.0; // BD-MCMC visit share (post burn-in)
  std::vector<int> cols;
  Eigen::VectorXd coef;        // shrinkage * OLS estimate
  Eigen::MatrixXd xtx_inv;
  double s2g = 0.0;            // y'y (1 - shrink*R^2) / (n-1)
  double shrink = 0.0;
};

struct BmaResult {
  Method method = Method::enumeration;
  GPriorSpec gspec;
  ModelPriorSpec mprior;
  int n = 0;
  int q_total = 0;
  double g_resolved = 0.0;  // fixed kinds only
  double intercept_mean = 0.0;
  std::vector<std::string> columns;
  Eigen::VectorXd pip;        // exact over the full enumerated / visited set
  Eigen::VectorXd coef_mean;  // model-averaged, zero when excluded
  Eigen::VectorXd coef_sd;
  std::vector<ModelRecord> models;  // sorted by pmp desc, mask asc; pmp sums to 1
  double total_visited_mass = 1.0;
  std::uint64_t n_visited = 0;
  std::uint64_t iterations = 0;
  bool low_mass_warning = false;
};

struct BmaOptions {
  int enumeration_cap = 25;
  std::size_t max_stored_models = 4096;
};

namespace detail {

inline ModelRecord make_record(const BmaProblem& prob, ModelId model, const GPriorSpec& gspec,
                               double logml) {
  ModelRecord rec;
  rec.mask = model.mask;
  rec.size = model.size();
  rec.log_marginal = logml;
  auto f = prob.fit(model);
  if (!f.has_value()) throw numeric_error("make_record: singular model");
  rec.cols = f->cols;
  rec.shrink = prob.shrinkage(model, gspec);
  rec.coef = rec.shrink * f->beta_ols;
  rec.xtx_inv = f->xtx_inv;
  rec.s2g = prob.yty() * (1.0 - rec.shrink * f->r2) / (prob.n() - 1);
  return rec;
}

// Location and squared scale of the Student-t predictive for one model at a
// (standardized) predictor row.
inline void predictive_params(const ModelRecord& rec, double intercept, int n,
                              const Eigen::VectorXd& x_new, double& loc, double& scale2) {
  const int q = static_cast<int>(rec.cols.size());
  Eigen::VectorXd xs(q);
  for (int a = 0; a < q; ++a) xs(a) = x_new(rec.cols[a]);
  loc = intercept + (q > 0 ? xs.dot(rec.coef) : 0.0);
  double quad = 0.0;
  if (q > 0) quad = rec.shrink * xs.dot(rec.xtx_inv * xs);
  scale2 = rec.s2g * (1.0 + 1.0 / static_cast<double>(n) + quad);
}

inline void sort_records(std::vector<ModelRecord>& recs) {
  std::sort(recs.begin(), recs.end(), [](const ModelRecord& a, const ModelRecord& b) {
    if (a.pmp != b.pmp) return a.pmp > b.pmp;
    return a.mask < b.mask;
  });
}

}  // namespace detail

namespace detail {

struct TopEntry {
  double lp;
  std::uint64_t mask;
};

// Per-block streaming accumulators for one contiguous mask range. Each block
// is processed sequentially, so combining blocks in index order gives results
// independent of the number of worker threads.
struct EnumBlock {
  double max_lp = -std::numeric_limits<double>::infinity();
  double z = 0.0;
  Eigen::VectorXd pip, coef, coef2;
  std::vector<TopEntry> top;
};

inline bool top_entry_heap_less(const TopEntry& a, const TopEntry& b) {
  if (a.lp != b.lp) return a.lp > b.lp;  // heap keyed on smallest lp
  return a.mask < b.mask;
}

inline EnumBlock enumerate_block(const BmaProblem& prob, const GPriorSpec& gspec,
                                 const ModelPriorSpec& mspec, std::uint64_t mask_begin,
                                 std::uint64_t mask_end, std::size_t max_stored) {
  const int q_total = prob.q_total();
  const int n = prob.n();
  const double df = static_cast<double>(n - 1);
  const double var_factor = df > 2.0 ? df / (df - 2.0) : std::numeric_limits<double>::quiet_NaN();

  EnumBlock blk;
  blk.pip = Eigen::VectorXd::Zero(q_total);
  blk.coef = Eigen::VectorXd::Zero(q_total);
  blk.coef2 = Eigen::VectorXd::Zero(q_total);
  blk.top.reserve(std::min<std::size_t>(max_stored + 1, mask_end - mask_begin));

  for (std::uint64_t mask = mask_begin; mask < mask_end; ++mask) {
    ModelId model{mask};
    auto f = prob.fit(model);
    if (!f.has_value()) continue;
    const int q = static_cast<int>(f->cols.size());
    double logml;
    double shrink;
    if (gspec.kind == GPriorKind::hyper_g) {
      logml = prob.log_marginal_hyper_g(q, f->r2, gspec.hyper_alpha);
      shrink = prob.hyper_g_mean_shrinkage(q, f->r2, gspec.hyper_alpha);
    } else {
      const double g = gspec.resolve_g(n, q_total);
      logml = prob.log_marginal_fixed_g(q, f->r2, g);
      shrink = g / (1.0 + g);
    }
    const double lp = logml + model_prior_log(model, mspec, q_total);

    if (lp > blk.max_lp) {
      const double scale = std::exp(blk.max_lp - lp);
      blk.z *= scale;
      blk.pip *= scale;
      blk.coef *= scale;
      blk.coef2 *= scale;
      blk.max_lp = lp;
    }
    const double w = std::exp(lp - blk.max_lp);
    blk.z += w;
    const double s2g = prob.yty() * (1.0 - shrink * f->r2) / df;
    for (int a = 0; a < q; ++a) {
      const int j = f->cols[a];
      const double m = shrink * f->beta_ols(a);
      const double v = var_factor * s2g * shrink * f->xtx_inv(a, a);
      blk.pip(j) += w;
      blk.coef(j) += w * m;
      blk.coef2(j) += w * (v + m * m);
    }

    blk.top.push_back({lp, mask});
    std::push_heap(blk.top.begin(), blk.top.end(), top_entry_heap_less);
    if (blk.top.size() > max_stored) {
      std::pop_heap(blk.top.begin(), blk.top.end(), top_entry_heap_less);
      blk.top.pop_back();
    }
  }
  return blk;
}

}  // namespace detail

// Exact Bayesian model averaging over all 2^Q models. The mask space is cut
// into fixed-size blocks processed across threads; block accumulators merge
// in index order, so the result does not depend on the thread count.
inline BmaResult enumerate_bma(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                               const GPriorSpec& gspec, const ModelPriorSpec& mspec,
                               const BmaOptions& opts = {}) {
  BmaProblem prob(y, X);
  const int q_total = prob.q_total();
  if (q_total > opts.enumeration_cap)
    throw config_error("enumerate_bma: predictor count exceeds enumeration cap");
  const int n = prob.n();
  const std::uint64_t n_models = 1ULL << q_total;

  constexpr std::uint64_t kBlockSize = 1ULL << 16;
  const std::uint64_t n_blocks = (n_models + kBlockSize - 1) / kBlockSize;
  std::vector<detail::EnumBlock> blocks(static_cast<std::size_t>(n_blocks));

  if (n_blocks == 1) {
    blocks[0] = detail::enumerate_block(prob, gspec, mspec, 0, n_models, opts.max_stored_models);
  } else {
    std::atomic<std::uint64_t> next{0};
    const unsigned n_threads = std::min<unsigned>(
        {std::max(1u, std::thread::hardware_concurrency()), static_cast<unsigned>(n_blocks), 16u});
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&, t]() {
        try {
          for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            const std::uint64_t lo = b * kBlockSize;
            const std::uint64_t hi = std::min(n_models, lo + kBlockSize);
            blocks[static_cast<std::size_t>(b)] =
                detail::enumerate_block(prob, gspec, mspec, lo, hi, opts.max_stored_models);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // Merge blocks in index order.
  double max_lp = -std::numeric_limits<double>::infinity();
  for (const auto& blk : blocks) max_lp = std::max(max_lp, blk.max_lp);
  double z_acc = 0.0;
  Eigen::VectorXd pip_acc = Eigen::VectorXd::Zero(q_total);
  Eigen::VectorXd coef_acc = Eigen::VectorXd::Zero(q_total);
  Eigen::VectorXd coef2_acc = Eigen::VectorXd::Zero(q_total);
  std::vector<detail::TopEntry> top;
  for (const auto& blk : blocks) {
    if (blk.z <= 0.0) continue;
    const double scale = std::exp(blk.max_lp - max_lp);
    z_acc += scale * blk.z;
    pip_acc += scale * blk.pip;
    coef_acc += scale * blk.coef;
    coef2_acc += scale * blk.coef2;
    top.insert(top.end(), blk.top.begin(), blk.top.end());
  }
  std::sort(top.begin(), top.end(), [](const detail::TopEntry& a, const detail::TopEntry& b) {
    if (a.lp != b.lp) return a.lp > b.lp;
    return a.mask < b.mask;
  });
  if (top.size() > opts.max_stored_models) top.resize(opts.max_stored_models);
  if (z_acc <= 0.0) throw numeric_error("enumerate_bma: no estimable model");

  BmaResult result;
  result.method = Method::enumeration;
  result.gspec = gspec;
  result.mprior = mspec;
  result.n = n;
  result.q_total = q_total;
  if (gspec.kind != GPriorKind::hyper_g) result.g_resolved = gspec.resolve_g(n, q_total);
  result.intercept_mean = prob.ybar();
  result.pip = pip_acc / z_acc;
  result.coef_mean = coef_acc / z_acc;
  result.coef_sd.resize(q_total);
  for (int j = 0; j < q_total; ++j) {
    const double second = coef2_acc(j) / z_acc;  // excluded models contribute 0
    const double var = std::max(0.0, second - result.coef_mean(j) * result.coef_mean(j));
    result.coef_sd(j) = std::sqrt(var);
  }
  result.n_visited = n_models;
  result.total_visited_mass = 1.0;

  double stored_mass = 0.0;
  for (const auto& e : top) stored_mass += std::exp(e.lp - max_lp);
  for (const auto& e : top) {
    auto rec = detail::make_record(prob, ModelId{e.mask}, gspec, 0.0);
    rec.log_marginal = e.lp - model_prior_log(ModelId{e.mask}, mspec, q_total);
    rec.pmp = std::exp(e.lp - max_lp) / stored_mass;
    result.models.push_back(std::move(rec));
  }
  detail::sort_records(result.models);
  return result;
}

// Birth-death MCMC over the model space: toggle one uniformly chosen
// predictor per step and accept by the Metropolis ratio of posterior weights.
inline BmaResult bd_mcmc_bma(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                             const GPriorSpec& gspec, const ModelPriorSpec& mspec,
                             std::uint64_t n_iter, std::uint64_t burn_in, std::uint64_t seed,
                             const BmaOptions& opts = {}) {
  if (n_iter <= burn_in) throw config_error("bd_mcmc_bma: n_iter must exceed burn_in");
  BmaProblem prob(y, X);
  const int q_total = prob.q_total();
  const int n = prob.n();

  std::unordered_map<std::uint64_t, double> log_post;  // mask -> log(ml * prior)
  auto eval = [&](std::uint64_t mask) {
    auto it = log_post.find(mask);
    if (it != log_post.end()) return it->second;
    ModelId model{mask};
    double lp = -std::numeric_limits<double>::infinity();
    auto f = prob.fit(model);
    if (f.has_value()) {
      const int q = static_cast<int>(f->cols.size());
      double logml;
      if (gspec.kind == GPriorKind::hyper_g)
        logml = prob.log_marginal_hyper_g(q, f->r2, gspec.hyper_alpha);
      else
        logml = prob.log_marginal_fixed_g(q, f->r2, gspec.resolve_g(n, q_total));
      lp = logml + model_prior_log(model, mspec, q_total);
    }
    log_post.emplace(mask, lp);
    return lp;
  };

  Rng rng(seed);
  std::uint64_t state = 0;  // start from the null model
  double state_lp = eval(state);
  std::map<std::uint64_t, std::uint64_t> visit_count;  // post burn-in states
  std::map<std::uint64_t, double> visited_lp;          // every chain state
  visited_lp[state] = state_lp;

  for (std::uint64_t it = 0; it < n_iter; ++it) {
    const int j = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(q_total)));
    const std::uint64_t proposal = state ^ (1ULL << j);
    const double prop_lp = eval(proposal);
    const double log_ratio = prop_lp - state_lp;
    if (log_ratio >= 0.0 || std::log(rng.uniform() + 1e-300) < log_ratio) {
      state = proposal;
      state_lp = prop_lp;
      visited_lp.emplace(state, state_lp);
    }
    if (it >= burn_in) ++visit_count[state];
  }

  // Analytic weights over the visited set.
  double max_lp = -std::numeric_limits<double>::infinity();
  for (const auto& [mask, lp] : visited_lp) max_lp = std::max(max_lp, lp);
  double z_visited = 0.0;
  for (const auto& [mask, lp] : visited_lp) z_visited += std::exp(lp - max_lp);

  BmaResult result;
  result.method = Method::bd_mcmc;
  result.gspec = gspec;
  result.mprior = mspec;
  result.n = n;
  result.q_total = q_total;
  if (gspec.kind != GPriorKind::hyper_g) result.g_resolved = gspec.resolve_g(n, q_total);
  result.intercept_mean = prob.ybar();
  result.n_visited = visited_lp.size();
  result.iterations = n_iter;

  const double df = static_cast<double>(n - 1);
  const double var_factor = df > 2.0 ? df / (df - 2.0) : std::numeric_limits<double>::quiet_NaN();
  result.pip = Eigen::VectorXd::Zero(q_total);
  result.coef_mean = Eigen::VectorXd::Zero(q_total);
  Eigen::VectorXd coef2 = Eigen::VectorXd::Zero(q_total);
  for (const auto& [mask, lp] : visited_lp) {
    const double pmp = std::exp(lp - max_lp) / z_visited;
    if (pmp <= 0.0) continue;
    ModelId model{mask};
    auto f = prob.fit(model);
    if (!f.has_value()) continue;
    const double shrink = prob.shrinkage(model, gspec);
    const double s2g = prob.yty() * (1.0 - shrink * f->r2) / df;
    for (std::size_t a = 0; a < f->cols.size(); ++a) {
      const int jj = f->cols[a];
      const double m = shrink * f->beta_ols(static_cast<Eigen::Index>(a));
      const double v = var_factor * s2g * shrink *
                       f->xtx_inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
      result.pip(jj) += pmp;
      result.coef_mean(jj) += pmp * m;
      coef2(jj) += pmp * (v + m * m);
    }
  }
  result.coef_sd.resize(q_total);
  for (int j = 0; j < q_total; ++j) {
    const double var = std::max(0.0, coef2(j) - result.coef_mean(j) * result.coef_mean(j));
    result.coef_sd(j) = std::sqrt(var);
  }

  // Stored top set by analytic weight.
  std::vector<std::pair<double, std::uint64_t>> ranked;  // (lp, mask)
  ranked.reserve(visited_lp.size());
  for (const auto& [mask, lp] : visited_lp) ranked.emplace_back(lp, mask);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (ranked.size() > opts.max_stored_models) ranked.resize(opts.max_stored_models);
  double stored_mass = 0.0;
  for (const auto& [lp, mask] : ranked) stored_mass += std::exp(lp - max_lp);
  const std::uint64_t total_visits =
      [&] {
        std::uint64_t t = 0;
        for (const auto& [mask, c] : visit_count) t += c;
        return t;
      }();
  for (const auto& [lp, mask] : ranked) {
    auto rec = detail::make_record(prob, ModelId{mask}, gspec, 0.0);
    rec.log_marginal = lp - model_prior_log(ModelId{mask}, mspec, q_total);
    rec.pmp = std::exp(lp - max_lp) / stored_mass;
    auto vc = visit_count.find(mask);
    rec.empirical_freq =
        vc == visit_count.end() ? 0.0
                                : static_cast<double>(vc->second) / static_cast<double>(total_visits);
    result.models.push_back(std::move(rec));
  }
  detail::sort_records(result.models);

  // Total posterior mass covered by the visited set, with the normalizing
  // constant estimated from the models whose empirical frequencies are most
  // reliable (ratio estimator over the top half of the stored set).
  {
    std::size_t k = std::max<std::size_t>(1, result.models.size() / 2);
    if (result.models.size() >= 2 && k == result.models.size()) k = result.models.size() - 1;
    double w_s = 0.0, f_s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      w_s += std::exp((result.models[i].log_marginal +
                       model_prior_log(ModelId{result.models[i].mask}, mspec, q_total)) -
                      max_lp);
      f_s += result.models[i].empirical_freq;
    }
    if (f_s > 0.0 && f_s < 1.0 - 1e-12 && w_s > 0.0) {
      const double z_hat = w_s / f_s;
      result.total_visited_mass = std::min(1.0, z_visited / z_hat);
    } else {
      result.total_visited_mass = 1.0;
    }
    result.low_mass_warning = result.total_visited_mass < 0.5;
  }
  return result;
}

// Posterior predictive mean and sd for a standardized predictor row, i.e. the
// PMP-weighted mixture over the stored models (law of total variance).
inline std::pair<double, double> averaged_prediction(const BmaResult& result,
                                                     const Eigen::VectorXd& x_new) {
  if (x_new.size() != result.q_total)
    throw data_error("averaged_prediction: predictor-row dimension mismatch");
  if (result.models.empty()) throw numeric_error("averaged_prediction: empty model set");
  const double df = static_cast<double>(result.n - 1);
  const double var_factor = df > 2.0 ? df / (df - 2.0) : std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0, second = 0.0;
  for (const auto& rec : result.models) {
    double loc, scale2;
    detail::predictive_params(rec, result.intercept_mean, result.n, x_new, loc, scale2);
    mean += rec.pmp * loc;
    second += rec.pmp * (var_factor * scale2 + loc * loc);
  }
  const double var = std::max(0.0, second - mean * mean);
  return {mean, std::sqrt(var)};
}

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double q025 = 0.0;
  double q975 = 0.0;
  double expected = 0.0;
  double observed = 0.0;
};

namespace detail {

struct MixtureComponent {
  double weight;
  double loc;
  double scale;  // 0 allowed (point mass)
  double df;
};

// Truncates to the highest-weight components once the requested mass is
// covered (records are already sorted by pmp), then renormalizes. Exact
// whenever the stored set is within the component cap.
inline std::vector<MixtureComponent> predictive_mixture(const BmaResult& result,
                                                        const Eigen::VectorXd& x_new,
                                                        std::size_t max_components = 512,
                                                        double mass_target = 0.999) {
  if (x_new.size() != result.q_total)
    throw data_error("predictive_mixture: predictor-row dimension mismatch");
  std::vector<MixtureComponent> comps;
  const double df = static_cast<double>(result.n - 1);
  double mass = 0.0;
  for (const auto& rec : result.models) {
    double loc, scale2;
    predictive_params(rec, result.intercept_mean, result.n, x_new, loc, scale2);
    comps.push_back({rec.pmp, loc, std::sqrt(std::max(0.0, scale2)), df});
    mass += rec.pmp;
    if (comps.size() >= max_components && mass >= mass_target) break;
  }
  if (mass > 0.0 && mass != 1.0)
    for (auto& c : comps) c.weight /= mass;
  return comps;
}

inline double mixture_cdf(const std::vector<MixtureComponent>& comps, double x) {
  double c = 0.0;
  for (const auto& comp : comps) {
    if (comp.weight < 1e-12) continue;
    if (comp.scale <= 0.0) c += comp.weight * (x >= comp.loc ? 1.0 : 0.0);
    else c += comp.weight * student_t_cdf(x, comp.df, comp.loc, comp.scale);
  }
  return c;
}

inline double mixture_quantile(const std::vector<MixtureComponent>& comps, double p, double lo,
                               double hi) {
  for (int it = 0; it < 60 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf(comps, mid) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Draws from the predictive mixture at a fixed predictor row: the component
// table and cumulative weights are built once, then each draw is a binary
// search plus one t variate.
class PredictiveSampler {
 public:
  PredictiveSampler(const BmaResult& result, const Eigen::VectorXd& x_new)
      : comps_(detail::predictive_mixture(result, x_new)) {
    if (comps_.empty()) throw numeric_error("PredictiveSampler: empty model set");
    cumulative_.reserve(comps_.size());
    double acc = 0.0;
    for (const auto& c : comps_) {
      acc += c.weight;
      cumulative_.push_back(acc);
    }
    cumulative_.back() = 1.0;
  }

  double draw(Rng& rng) const {
    const double u = rng.uniform();
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
    const auto& c = comps_[std::min(k, comps_.size() - 1)];
    if (c.scale <= 0.0) return c.loc;
    return c.loc + c.scale * rng.student_t(c.df);
  }

 private:
  std::vector<detail::MixtureComponent> comps_;
  std::vector<double> cumulative_;
};

// BMA predictive density of one observation's outcome given its predictors,
// evaluated on a 512-point grid spanning +-5 mixture sds.
inline DensityCurve predictive_density(const BmaResult& result, const Eigen::VectorXd& y,
                                       const Eigen::MatrixXd& X, int row_index,
                                       int grid_points = 512) {
  if (row_index < 0 || row_index >= y.size())
    throw data_error("predictive_density: row index out of range");
  const Eigen::VectorXd x_new = X.row(row_index);
  auto comps = detail::predictive_mixture(result, x_new);

  double mean = 0.0, second = 0.0;
  for (const auto& c : comps) {
    const double vf = c.df > 2.0 ? c.df / (c.df - 2.0) : 1.0;
    mean += c.weight * c.loc;
    second += c.weight * (vf * c.scale * c.scale + c.loc * c.loc);
  }
  const double sd = std::sqrt(std::max(1e-300, second - mean * mean));

  DensityCurve curve;
  curve.expected = mean;
  curve.observed = y(row_index);
  curve.grid.resize(grid_points);
  curve.density.resize(grid_points);
  const double lo = mean - 5.0 * sd;
  const double hi = mean + 5.0 * sd;
  // t normalization shared by every component (common df)
  const double df = static_cast<double>(result.n - 1);
  const double t_norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                        0.5 * std::log(df * kPi);
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
    double d = 0.0;
    for (const auto& c : comps) {
      if (c.scale <= 0.0) continue;
      const double z = (x - c.loc) / c.scale;
      d += c.weight *
           std::exp(t_norm - std::log(c.scale) - 0.5 * (df + 1.0) * std::log1p(z * z / df));
    }
    curve.grid[i] = x;
    curve.density[i] = d;
  }

  // quantiles by numerical inversion: interpolate the trapezoid CDF of the
  // evaluated grid; degenerate mixtures (mass off-grid or point components)
  // fall back to bisecting the exact mixture CDF
  std::vector<double> cum(static_cast<std::size_t>(grid_points), 0.0);
  for (int i = 1; i < grid_points; ++i)
    cum[static_cast<std::size_t>(i)] =
        cum[static_cast<std::size_t>(i - 1)] +
        0.5 * (curve.density[static_cast<std::size_t>(i)] + curve.density[static_cast<std::size_t>(i - 1)]) *
            (curve.grid[static_cast<std::size_t>(i)] - curve.grid[static_cast<std::size_t>(i - 1)]);
  const double total = cum.back();
  auto grid_quantile = [&](double p) {
    const double target = p * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const std::size_t k = std::min<std::size_t>(
        std::max<std::ptrdiff_t>(1, it - cum.begin()), cum.size() - 1);
    const double seg = cum[k] - cum[k - 1];
    const double f = seg > 0.0 ? (target - cum[k - 1]) / seg : 0.5;
    return curve.grid[k - 1] + f * (curve.grid[k] - curve.grid[k - 1]);
  };
  if (total > 0.9) {
    curve.q025 = grid_quantile(0.025);
    curve.q975 = grid_quantile(0.975);
  } else {
    curve.q025 = detail::mixture_quantile(comps, 0.025, mean - 50.0 * sd, mean + 50.0 * sd);
    curve.q975 = detail::mixture_quantile(comps, 0.975, mean - 50.0 * sd, mean + 50.0 * sd);
  }
  return curve;
}

// One draw of the outcome from the BMA predictive mixture at x_new. For many
// draws at the same row, build a PredictiveSampler once instead.
inline double sample_prediction(const BmaResult& result, const Eigen::VectorXd& x_new, Rng& rng) {
  return PredictiveSampler(result, x_new).draw(rng);
}

}  // namespace profcast::bma
