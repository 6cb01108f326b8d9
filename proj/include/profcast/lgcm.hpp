#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "profcast/errors.hpp"
#include "profcast/mcmc.hpp"
#include "profcast/panel.hpp"
#include "profcast/rng.hpp"
#include "profcast/stats.hpp"

namespace profcast::lgcm {

// One slope-loading entry: either pinned to a constant or freely estimated
// (value then holds the prior mean / initial state).
struct LoadingEntry {
  bool fixed = true;
  double value = 0.0;
};

struct LoadingSpec {
  std::vector<LoadingEntry> slope_loadings;
  std::string label = "custom";

  int n_cycles() const { return static_cast<int>(slope_loadings.size()); }

  int num_free() const {
    int c = 0;
    for (const auto& e : slope_loadings)
      if (!e.fixed) ++c;
    return c;
  }

  void validate() const {
    if (slope_loadings.size() < 2) throw config_error("LoadingSpec: need at least 2 cycles");
    int n_fixed = 0;
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& e : slope_loadings) {
      if (e.fixed) {
        ++n_fixed;
        if (e.value <= prev)
          throw config_error("LoadingSpec: fixed loadings must be strictly increasing");
        prev = e.value;
      }
    }
    if (n_fixed < 2) throw config_error("LoadingSpec: at least two loadings must be fixed");
  }

  // Linear ladder 0..T-1, all fixed.
  static LoadingSpec linear(int n_cycles) {
    LoadingSpec s;
    s.label = "M0";
    for (int t = 0; t < n_cycles; ++t) s.slope_loadings.push_back({true, static_cast<double>(t)});
    return s;
  }

  // Ladder with chosen indices freed; prior means extrapolate the ladder.
  static LoadingSpec latent_basis(int n_cycles, const std::vector<int>& free_indices,
                                  const std::string& label) {
    LoadingSpec s = linear(n_cycles);
    s.label = label;
    for (int idx : free_indices) {
      if (idx < 0 || idx >= n_cycles) throw config_error("LoadingSpec: free index out of range");
      s.slope_loadings[static_cast<std::size_t>(idx)].fixed = false;
    }
    s.validate();
    return s;
  }

  static LoadingSpec m1(int n_cycles) { return latent_basis(n_cycles, {n_cycles - 1}, "M1"); }

  static LoadingSpec m2(int n_cycles) {
    return latent_basis(n_cycles, {n_cycles - 2, n_cycles - 1}, "M2");
  }
};

inline LoadingSpec loading_spec_from_label(const std::string& label, int n_cycles) {
  if (label == "m0" || label == "M0") return LoadingSpec::linear(n_cycles);
  if (label == "m1" || label == "M1") return LoadingSpec::m1(n_cycles);
  if (label == "m2" || label == "M2") return LoadingSpec::m2(n_cycles);
  throw config_error("unknown growth model label: " + label);
}

struct GrowthPriors {
  // Coefficient prior: vec(coefs) ~ N(vec(mean), cov). Empty members default
  // to zeros and 100*I at fit time.
  Eigen::MatrixXd coef_mean;  // 2 x P
  Eigen::MatrixXd coef_cov;   // (2P) x (2P)
  // half-Cauchy(loc, scale) on each per-cycle residual sd
  double resid_loc = 0.0;
  double resid_scale = 2.5;
  // inverse-Wishart(scale, df) on the growth-parameter covariance
  Eigen::MatrixXd growth_cov_scale = Eigen::MatrixXd::Identity(2, 2);
  double growth_cov_df = 4.0;
  // Normal prior sd on each free loading (mean = ladder extrapolation)
  double free_loading_sd = 10.0;

  void validate() const {
    if (resid_scale <= 0.0) throw config_error("GrowthPriors: residual prior scale must be > 0");
    if (growth_cov_df < 2.0) throw config_error("GrowthPriors: growth_cov_df below dimension");
    if (free_loading_sd <= 0.0) throw config_error("GrowthPriors: free_loading_sd must be > 0");
    Eigen::LLT<Eigen::MatrixXd> llt(growth_cov_scale);
    if (llt.info() != Eigen::Success)
      throw config_error("GrowthPriors: growth_cov_scale not positive definite");
  }
};

struct McmcConfig {
  int n_chains = 4;
  int n_iter = 10000;
  int burn_in = 5000;
  int thin = 1;
  std::uint64_t seed = 20290101;
  bool adapt = true;

  int retained_per_chain() const { return (n_iter - burn_in) / thin; }

  void validate() const {
    if (n_chains < 1) throw config_error("McmcConfig: need at least one chain");
    if (n_iter <= burn_in) throw config_error("McmcConfig: n_iter must exceed burn_in");
    if (thin < 1) throw config_error("McmcConfig: thin must be >= 1");
    if (retained_per_chain() < 2) throw config_error("McmcConfig: too few retained draws");
  }
};

struct ParamSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
  double rhat = 0.0;
  double ess = 0.0;
};

struct GrowthPosterior {
  std::vector<std::string> countries;
  panel::Group group = panel::Group::boys;
  panel::Domain domain = panel::Domain::reading;
  LoadingSpec spec;
  int n_chains = 0;
  int retained_per_chain = 0;

  std::vector<std::string> param_names;
  Eigen::MatrixXd draws;    // S_total x K, chain-major rows
  Eigen::MatrixXd loglik;   // S_total x n, per-country integrated log-likelihood
  std::map<std::string, ParamSummary> summaries;
  bool convergence_warning = false;
  std::vector<std::string> warning_params;
  int jitter_repairs = 0;

  int param_index(const std::string& name) const {
    for (std::size_t k = 0; k < param_names.size(); ++k)
      if (param_names[k] == name) return static_cast<int>(k);
    throw data_error("unknown parameter: " + name);
  }

  Eigen::VectorXd column(const std::string& name) const {
    return draws.col(param_index(name));
  }

  int n_countries() const { return static_cast<int>(countries.size()); }
  int total_draws() const { return static_cast<int>(draws.rows()); }
};

namespace detail {

struct FitInput {
  Eigen::MatrixXd y;       // n x T logit outcomes
  Eigen::MatrixXd x;       // n x P (P >= 1, first column constant)
  std::vector<std::string> countries;
  panel::Group group;
  panel::Domain domain;
};

struct ChainOutput {
  Eigen::MatrixXd draws;   // retained x K
  Eigen::MatrixXd loglik;  // retained x n
  int jitter_repairs = 0;
};

class ChainSampler {
 public:
  ChainSampler(const FitInput& input, const LoadingSpec& spec, const GrowthPriors& priors,
               const McmcConfig& cfg, std::uint64_t chain_seed)
      : in_(input), spec_(spec), priors_(priors), cfg_(cfg), rng_(chain_seed) {
    n_ = static_cast<int>(in_.y.rows());
    t_ = static_cast<int>(in_.y.cols());
    p_ = static_cast<int>(in_.x.cols());

    lambda_.resize(t_);
    for (int t = 0; t < t_; ++t) lambda_(t) = spec_.slope_loadings[static_cast<std::size_t>(t)].value;

    coef_mean_ = priors_.coef_mean.size() ? priors_.coef_mean : Eigen::MatrixXd::Zero(2, p_);
    if (coef_mean_.rows() != 2 || coef_mean_.cols() != p_)
      throw config_error("GrowthPriors: coef_mean has wrong shape");
    coef_prec_ = priors_.coef_cov.size()
                     ? Eigen::MatrixXd(priors_.coef_cov.inverse())
                     : Eigen::MatrixXd(Eigen::MatrixXd::Identity(2 * p_, 2 * p_) / 100.0);
    if (coef_prec_.rows() != 2 * p_) throw config_error("GrowthPriors: coef_cov has wrong shape");

    initialize_state();
  }

  ChainOutput run() {
    ChainOutput out;
    const int retained = cfg_.retained_per_chain();
    out.draws.resize(retained, n_params());
    out.loglik.resize(retained, n_);
    int kept = 0;
    for (int it = 0; it < cfg_.n_iter; ++it) {
      const bool adapting = cfg_.adapt && it < cfg_.burn_in;
      step(adapting, it);
      if (it >= cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0 && kept < retained) {
        record(out, kept);
        ++kept;
      }
    }
    out.jitter_repairs = jitter_repairs_;
    return out;
  }

  int n_params() const {
    // eta (2n) + coefs (2P) + cov (3) + resid sds (T) + free loadings
    return 2 * n_ + 2 * p_ + 3 + t_ + spec_.num_free();
  }

 private:
  void initialize_state() {
    eta_.resize(n_, 2);
    // per-country OLS on the initial ladder
    Eigen::MatrixXd basis(t_, 2);
    for (int t = 0; t < t_; ++t) {
      basis(t, 0) = 1.0;
      basis(t, 1) = lambda_(t);
    }
    const Eigen::MatrixXd proj =
        (basis.transpose() * basis).ldlt().solve(basis.transpose()).eval();
    for (int i = 0; i < n_; ++i) eta_.row(i) = (proj * in_.y.row(i).transpose()).transpose();

    coefs_ = Eigen::MatrixXd::Zero(2, p_);
    // regress initial growth parameters on predictors for a sane start
    const Eigen::MatrixXd xtx = in_.x.transpose() * in_.x +
                                1e-8 * Eigen::MatrixXd::Identity(p_, p_);
    coefs_ = (xtx.ldlt().solve(in_.x.transpose() * eta_)).transpose();

    growth_cov_ = Eigen::MatrixXd::Identity(2, 2) * 0.1;
    resid_sd_ = Eigen::VectorXd::Constant(t_, 0.1);
    mh_scale_ = Eigen::VectorXd::Constant(t_, 0.2);
    mh_accept_ = Eigen::VectorXd::Zero(t_);
    mh_tries_ = Eigen::VectorXd::Zero(t_);

    // chain-specific jitter so independent chains start dispersed
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < 2; ++k) eta_(i, k) += 0.1 * rng_.normal();
    for (int r = 0; r < 2; ++r)
      for (int p = 0; p < p_; ++p) coefs_(r, p) += 0.1 * rng_.normal();
  }

  Eigen::MatrixXd loading_matrix() const {
    Eigen::MatrixXd basis(t_, 2);
    for (int t = 0; t < t_; ++t) {
      basis(t, 0) = 1.0;
      basis(t, 1) = lambda_(t);
    }
    return basis;
  }

  Eigen::MatrixXd safe_llt_lower(Eigen::MatrixXd m) {
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() == Eigen::Success) return llt.matrixL();
      ++jitter_repairs_;
      m += std::pow(10.0, attempt - 8) * Eigen::MatrixXd::Identity(m.rows(), m.cols());
    }
    throw numeric_error("covariance repair failed: matrix not positive definite");
  }

  void update_eta() {
    const Eigen::MatrixXd basis = loading_matrix();
    Eigen::MatrixXd dinv = Eigen::MatrixXd::Zero(t_, t_);
    for (int t = 0; t < t_; ++t) dinv(t, t) = 1.0 / (resid_sd_(t) * resid_sd_(t));
    const Eigen::MatrixXd h = growth_cov_.inverse();
    const Eigen::MatrixXd prec = basis.transpose() * dinv * basis + h;
    const Eigen::MatrixXd cov = prec.inverse();
    const Eigen::MatrixXd cov_l = safe_llt_lower(cov);
    for (int i = 0; i < n_; ++i) {
      const Eigen::Vector2d prior_mean = coefs_ * in_.x.row(i).transpose();
      const Eigen::Vector2d b =
          basis.transpose() * dinv * in_.y.row(i).transpose() + h * prior_mean;
      const Eigen::Vector2d mean = cov * b;
      eta_.row(i) = rng_.mvn(mean, cov_l).transpose();
    }
  }

  void update_coefs() {
    const Eigen::MatrixXd h = growth_cov_.inverse();
    Eigen::MatrixXd prec = coef_prec_;
    Eigen::VectorXd rhs = coef_prec_ * Eigen::Map<const Eigen::VectorXd>(coef_mean_.data(), 2 * p_);
    for (int i = 0; i < n_; ++i) {
      const Eigen::VectorXd xi = in_.x.row(i).transpose();
      const Eigen::MatrixXd xxt = xi * xi.transpose();
      // kron(x x', H) accumulated blockwise
      for (int a = 0; a < p_; ++a)
        for (int b = 0; b < p_; ++b)
          prec.block(2 * a, 2 * b, 2, 2) += xxt(a, b) * h;
      const Eigen::Vector2d hn = h * eta_.row(i).transpose();
      for (int a = 0; a < p_; ++a) rhs.segment(2 * a, 2) += hn * xi(a);
    }
    const Eigen::MatrixXd cov = prec.inverse();
    const Eigen::MatrixXd cov_l = safe_llt_lower(cov);
    const Eigen::VectorXd mean = cov * rhs;
    const Eigen::VectorXd v = rng_.mvn(mean, cov_l);
    coefs_ = Eigen::Map<const Eigen::MatrixXd>(v.data(), 2, p_);
  }

  void update_growth_cov() {
    Eigen::MatrixXd ss = priors_.growth_cov_scale;
    for (int i = 0; i < n_; ++i) {
      const Eigen::Vector2d e = eta_.row(i).transpose() - coefs_ * in_.x.row(i).transpose();
      ss += e * e.transpose();
    }
    growth_cov_ = rng_.inverse_wishart(ss, priors_.growth_cov_df + n_);
  }

  void update_resid_sds() {
    const Eigen::MatrixXd basis = loading_matrix();
    const Eigen::MatrixXd fit = eta_ * basis.transpose();  // n x T
    for (int t = 0; t < t_; ++t) {
      double ss = 0.0;
      for (int i = 0; i < n_; ++i) {
        const double r = in_.y(i, t) - fit(i, t);
        ss += r * r;
      }
      const double loc = priors_.resid_loc;
      const double scale = priors_.resid_scale;
      const double nn = static_cast<double>(n_);
      auto logpost = [&](double ls) {
        const double sd = std::exp(ls);
        if (sd <= loc) return -std::numeric_limits<double>::infinity();
        const double z = (sd - loc) / scale;
        // likelihood + half-Cauchy prior + log-scale Jacobian
        return -nn * ls - 0.5 * ss / (sd * sd) - std::log1p(z * z) + ls;
      };
      const double ls0 = std::log(resid_sd_(t));
      const double ls1 = mcmc::slice_sample(logpost, ls0, rng_, 1.0, 50, -18.0, 8.0);
      resid_sd_(t) = std::exp(ls1);
    }
  }

  void update_free_loadings(bool adapting, int iter) {
    for (int t = 0; t < t_; ++t) {
      if (spec_.slope_loadings[static_cast<std::size_t>(t)].fixed) continue;
      const double prior_mean = spec_.slope_loadings[static_cast<std::size_t>(t)].value;
      const double sd2 = resid_sd_(t) * resid_sd_(t);
      auto logpost = [&](double lam) {
        double ll = 0.0;
        for (int i = 0; i < n_; ++i) {
          const double r = in_.y(i, t) - eta_(i, 0) - lam * eta_(i, 1);
          ll -= r * r;
        }
        ll /= 2.0 * sd2;
        const double z = (lam - prior_mean) / priors_.free_loading_sd;
        return ll - 0.5 * z * z;
      };
      const double cur = lambda_(t);
      const double prop = cur + mh_scale_(t) * rng_.normal();
      const double log_ratio = logpost(prop) - logpost(cur);
      mh_tries_(t) += 1.0;
      if (log_ratio >= 0.0 || std::log(rng_.uniform() + 1e-300) < log_ratio) {
        lambda_(t) = prop;
        mh_accept_(t) += 1.0;
      }
      if (adapting && (iter + 1) % 50 == 0 && mh_tries_(t) > 0.0) {
        const double rate = mh_accept_(t) / mh_tries_(t);
        mh_scale_(t) *= rate > 0.44 ? 1.1 : 0.9;
        mh_scale_(t) = std::clamp(mh_scale_(t), 1e-4, 50.0);
        mh_accept_(t) = 0.0;
        mh_tries_(t) = 0.0;
      }
    }
  }

  void step(bool adapting, int iter) {
    update_eta();
    update_coefs();
    update_growth_cov();
    update_resid_sds();
    update_free_loadings(adapting, iter);
  }

  void record(ChainOutput& out, int row) {
    int k = 0;
    for (int i = 0; i < n_; ++i) {
      out.draws(row, k++) = eta_(i, 0);
      out.draws(row, k++) = eta_(i, 1);
    }
    for (int p = 0; p < p_; ++p)
      for (int r = 0; r < 2; ++r) out.draws(row, k++) = coefs_(r, p);
    out.draws(row, k++) = growth_cov_(0, 0);
    out.draws(row, k++) = growth_cov_(1, 0);
    out.draws(row, k++) = growth_cov_(1, 1);
    for (int t = 0; t < t_; ++t) out.draws(row, k++) = resid_sd_(t);
    for (int t = 0; t < t_; ++t)
      if (!spec_.slope_loadings[static_cast<std::size_t>(t)].fixed)
        out.draws(row, k++) = lambda_(t);

    // integrated per-country log-likelihood (growth parameters marginalized)
    const Eigen::MatrixXd basis = loading_matrix();
    Eigen::MatrixXd v = basis * growth_cov_ * basis.transpose();
    for (int t = 0; t < t_; ++t) v(t, t) += resid_sd_(t) * resid_sd_(t);
    Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) {
      v += 1e-10 * Eigen::MatrixXd::Identity(t_, t_);
      llt.compute(v);
      ++jitter_repairs_;
    }
    double log_det = 0.0;
    for (int t = 0; t < t_; ++t) log_det += 2.0 * std::log(llt.matrixL()(t, t));
    for (int i = 0; i < n_; ++i) {
      const Eigen::VectorXd mu = basis * (coefs_ * in_.x.row(i).transpose());
      const Eigen::VectorXd r = in_.y.row(i).transpose() - mu;
      const double quad = llt.matrixL().solve(r).squaredNorm();
      out.loglik(row, i) = -0.5 * (t_ * kLnTwoPi + log_det + quad);
    }
  }

  const FitInput& in_;
  LoadingSpec spec_;
  const GrowthPriors& priors_;
  const McmcConfig& cfg_;
  Rng rng_;
  int n_ = 0, t_ = 0, p_ = 0;

  Eigen::MatrixXd eta_;        // n x 2
  Eigen::MatrixXd coefs_;      // 2 x P
  Eigen::MatrixXd coef_mean_;  // 2 x P
  Eigen::MatrixXd coef_prec_;  // 2P x 2P
  Eigen::MatrixXd growth_cov_; // 2 x 2
  Eigen::VectorXd resid_sd_;   // T
  Eigen::VectorXd lambda_;     // T
  Eigen::VectorXd mh_scale_, mh_accept_, mh_tries_;
  int jitter_repairs_ = 0;
};

inline std::vector<std::string> build_param_names(const FitInput& input, const LoadingSpec& spec,
                                                  const std::vector<std::string>& pred_names) {
  std::vector<std::string> names;
  for (const auto& c : input.countries) {
    names.push_back("intercept[" + c + "]");
    names.push_back("slope[" + c + "]");
  }
  const int p = static_cast<int>(input.x.cols());
  for (int j = 0; j < p; ++j) {
    const std::string suffix = j == 0 ? "const" : pred_names[static_cast<std::size_t>(j - 1)];
    names.push_back("coef_intercept[" + suffix + "]");
    names.push_back("coef_slope[" + suffix + "]");
  }
  names.push_back("growth_var_intercept");
  names.push_back("growth_cov_is");
  names.push_back("growth_var_slope");
  for (int t = 0; t < static_cast<int>(input.y.cols()); ++t)
    names.push_back("resid_sd[t" + std::to_string(t) + "]");
  for (int t = 0; t < static_cast<int>(input.y.cols()); ++t)
    if (!spec.slope_loadings[static_cast<std::size_t>(t)].fixed)
      names.push_back("loading[t" + std::to_string(t) + "]");
  return names;
}

}  // namespace detail

// Fit the hierarchical growth model by MH-within-Gibbs. `X` (optional)
// supplies country-level predictors for the growth parameters; without it the
// between-country model reduces to grand means.
inline GrowthPosterior fit_growth(const std::vector<panel::OutcomeSeries>& series_set,
                                  const std::optional<panel::DesignMatrix>& X,
                                  const LoadingSpec& spec, const GrowthPriors& priors,
                                  const McmcConfig& cfg) {
  spec.validate();
  priors.validate();
  cfg.validate();
  if (series_set.empty()) throw data_error("fit_growth: empty series set");
  const int t = static_cast<int>(series_set.front().logit_values.size());
  if (t != spec.n_cycles()) throw data_error("fit_growth: loading spec / cycle count mismatch");

  detail::FitInput input;
  input.group = series_set.front().group;
  input.domain = series_set.front().domain;
  input.y.resize(static_cast<Eigen::Index>(series_set.size()), t);
  for (std::size_t i = 0; i < series_set.size(); ++i) {
    const auto& s = series_set[i];
    if (s.group != input.group || s.domain != input.domain)
      throw data_error("fit_growth: series set spans more than one group x domain");
    if (static_cast<int>(s.logit_values.size()) != t)
      throw data_error("fit_growth: series do not share the cycle set");
    for (int j = 0; j < t; ++j) {
      const double v = s.logit_values[static_cast<std::size_t>(j)];
      if (!std::isfinite(v)) throw data_error("fit_growth: non-finite logit value");
      input.y(static_cast<Eigen::Index>(i), j) = v;
    }
    input.countries.push_back(s.country);
  }

  std::vector<std::string> pred_names;
  if (X.has_value()) {
    const auto& dm = *X;
    input.x.resize(static_cast<Eigen::Index>(series_set.size()), dm.values.cols() + 1);
    for (std::size_t i = 0; i < input.countries.size(); ++i) {
      auto it = std::find(dm.countries.begin(), dm.countries.end(), input.countries[i]);
      if (it == dm.countries.end())
        throw data_error("fit_growth: predictor matrix missing country " + input.countries[i]);
      const Eigen::Index row = std::distance(dm.countries.begin(), it);
      input.x(static_cast<Eigen::Index>(i), 0) = 1.0;
      input.x.row(static_cast<Eigen::Index>(i)).tail(dm.values.cols()) = dm.values.row(row);
    }
    pred_names = dm.columns;
  } else {
    input.x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(series_set.size()), 1);
  }

  // Run chains in parallel; each consumes its own derived seed.
  std::vector<detail::ChainOutput> outputs(static_cast<std::size_t>(cfg.n_chains));
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.n_chains));
  for (int c = 0; c < cfg.n_chains; ++c) {
    workers.emplace_back([&, c]() {
      try {
        detail::ChainSampler sampler(input, spec, priors, cfg,
                                     derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
        outputs[static_cast<std::size_t>(c)] = sampler.run();
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GrowthPosterior post;
  post.countries = input.countries;
  post.group = input.group;
  post.domain = input.domain;
  post.spec = spec;
  post.n_chains = cfg.n_chains;
  post.retained_per_chain = cfg.retained_per_chain();
  post.param_names = detail::build_param_names(input, spec, pred_names);

  const int k = static_cast<int>(post.param_names.size());
  const int retained = cfg.retained_per_chain();
  post.draws.resize(static_cast<Eigen::Index>(cfg.n_chains) * retained, k);
  post.loglik.resize(static_cast<Eigen::Index>(cfg.n_chains) * retained, input.y.rows());
  for (int c = 0; c < cfg.n_chains; ++c) {
    post.draws.middleRows(static_cast<Eigen::Index>(c) * retained, retained) =
        outputs[static_cast<std::size_t>(c)].draws;
    post.loglik.middleRows(static_cast<Eigen::Index>(c) * retained, retained) =
        outputs[static_cast<std::size_t>(c)].loglik;
    post.jitter_repairs += outputs[static_cast<std::size_t>(c)].jitter_repairs;
  }

  // Summaries and convergence diagnostics per monitored parameter.
  for (int j = 0; j < k; ++j) {
    std::vector<std::vector<double>> chains;
    for (int c = 0; c < cfg.n_chains; ++c) {
      std::vector<double> v(static_cast<std::size_t>(retained));
      for (int r = 0; r < retained; ++r)
        v[static_cast<std::size_t>(r)] = post.draws(static_cast<Eigen::Index>(c) * retained + r, j);
      chains.push_back(std::move(v));
    }
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(cfg.n_chains) * retained);
    for (const auto& ch : chains) all.insert(all.end(), ch.begin(), ch.end());

    ParamSummary s;
    s.mean = mean(all);
    s.sd = all.size() > 1 ? stddev(all) : 0.0;
    s.q025 = quantile(all, 0.025);
    s.q500 = quantile(all, 0.5);
    s.q975 = quantile(all, 0.975);
    s.rhat = cfg.n_chains >= 2 ? mcmc::split_rhat(chains) : std::numeric_limits<double>::quiet_NaN();
    s.ess = mcmc::effective_sample_size(chains);
    if (std::isfinite(s.rhat) && s.rhat > 1.1) {
      post.convergence_warning = true;
      post.warning_params.push_back(post.param_names[static_cast<std::size_t>(j)]);
    }
    post.summaries[post.param_names[static_cast<std::size_t>(j)]] = s;
  }
  return post;
}

inline GrowthPosterior unconditional_growth(const std::vector<panel::OutcomeSeries>& series_set,
                                            const LoadingSpec& spec, const GrowthPriors& priors,
                                            const McmcConfig& cfg) {
  return fit_growth(series_set, std::nullopt, spec, priors, cfg);
}

struct SlopeSummary {
  std::string country;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
};

// Per-country rate-of-progress summaries; the means are the model-averaging
// outcome variable.
inline std::vector<SlopeSummary> posterior_slopes(const GrowthPosterior& post) {
  std::vector<SlopeSummary> out;
  for (const auto& c : post.countries) {
    const auto& s = post.summaries.at("slope[" + c + "]");
    out.push_back({c, s.mean, s.sd, s.q025, s.q975});
  }
  return out;
}

struct PercentSummary {
  double start_mean = 0.0, start_lo = 0.0, start_hi = 0.0;
  double rate_mean = 0.0, rate_lo = 0.0, rate_hi = 0.0;
};

// Back-transformed starting percentage and first-cycle percentage-point rate
// of progress, summarized over the grand-mean coefficient draws.
inline PercentSummary growth_percent_summary(const GrowthPosterior& post) {
  const Eigen::VectorXd b0 = post.column("coef_intercept[const]");
  const Eigen::VectorXd b1 = post.column("coef_slope[const]");
  std::vector<double> start(static_cast<std::size_t>(b0.size()));
  std::vector<double> rate(static_cast<std::size_t>(b0.size()));
  for (Eigen::Index i = 0; i < b0.size(); ++i) {
    start[static_cast<std::size_t>(i)] = 100.0 * inv_logit(b0(i));
    rate[static_cast<std::size_t>(i)] =
        100.0 * (inv_logit(b0(i) + b1(i)) - inv_logit(b0(i)));
  }
  PercentSummary s;
  s.start_mean = mean(start);
  s.start_lo = quantile(start, 0.025);
  s.start_hi = quantile(start, 0.975);
  s.rate_mean = mean(rate);
  s.rate_lo = quantile(rate, 0.025);
  s.rate_hi = quantile(rate, 0.975);
  return s;
}

}  // namespace profcast::lgcm
