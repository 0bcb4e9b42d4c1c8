#include "climex/mcmc.hpp"

#include <cmath>
#include <limits>

namespace climex {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kCovJitter = 1e-10;
constexpr double kBigScale = 2.38;

void check_config(const ChainConfig& cfg) {
  if (!(cfg.adapt_start > 0 && cfg.adapt_start < cfg.burn_in))
    throw user_error("chain config requires 0 < adapt_start < burn_in");
  if (cfg.iterations < 1) throw user_error("chain config requires iterations >= 1");
  if (!(cfg.beta_mix > 0.0 && cfg.beta_mix < 1.0))
    throw user_error("chain config requires beta_mix in (0,1)");
}

}  // namespace

RunningCovariance::RunningCovariance(int dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

void RunningCovariance::update(const Eigen::VectorXd& x) {
  ++n_;
  if (n_ == 1) {
    mean_ = x;
    return;
  }
  Eigen::VectorXd before = x - mean_;
  mean_ += before / static_cast<double>(n_);
  m2_ += before * (x - mean_).transpose();
}

Eigen::MatrixXd RunningCovariance::covariance() const {
  const auto dim = mean_.size();
  if (n_ < 2) return Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd c = m2_ / static_cast<double>(n_ - 1);
  return 0.5 * (c + c.transpose());  // exact symmetry for factorization
}

double acceptance_rate(const PosteriorChain& chain, Phase phase) {
  const long acc = (phase == Phase::fixed) ? chain.accepted_fixed : chain.accepted_adaptive;
  const long tot = (phase == Phase::fixed) ? chain.proposals_fixed : chain.proposals_adaptive;
  if (tot < 1) throw user_error("acceptance_rate: phase had no iterations");
  return static_cast<double>(acc) / static_cast<double>(tot);
}

Eigen::VectorXd propose(const Eigen::VectorXd& current, int k,
                        const RunningCovariance& cov, const ChainConfig& cfg,
                        SplitMix64& rng) {
  const auto d = current.size();
  if (k <= cfg.adapt_start) {
    Eigen::VectorXd cand = current;
    for (Eigen::Index j = 0; j < d; ++j) cand[j] += cfg.fixed_step_sd * rng.normal();
    return cand;
  }
  const double u_mix = rng.uniform();
  Eigen::VectorXd z(d);
  for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
  if (u_mix < cfg.beta_mix) {
    const double sd = cfg.literal_proposal
                          ? cfg.small_step_sd / 2.0
                          : cfg.small_step_sd / std::sqrt(static_cast<double>(d));
    return current + sd * z;
  }
  Eigen::MatrixXd sigma = cov.covariance();
  sigma.diagonal().array() += kCovJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    return current + cfg.fixed_step_sd * z;  // non-PSD fallback
  }
  const double scale = cfg.literal_proposal
                           ? kBigScale
                           : kBigScale / std::sqrt(static_cast<double>(d));
  const Eigen::VectorXd step = llt.matrixL() * z;
  return current + scale * step;
}

bool mh_accept(double log_l_current, double log_l_candidate, SplitMix64& rng) {
  const double u = rng.uniform();
  return std::log(u) < (log_l_candidate - log_l_current);
}

Eigen::VectorXd init_state(const Target& target, const ChainConfig& cfg,
                           SplitMix64& rng) {
  Eigen::VectorXd state(target.dim);
  for (int attempt = 0; attempt < cfg.init_retries; ++attempt) {
    target.draw_init(rng, state.data());
    if (std::isfinite(target.log_density(state.data()))) return state;
  }
  throw numeric_error("chain initialization failed after " +
                      std::to_string(cfg.init_retries) +
                      " attempts: no start with finite likelihood");
}

PosteriorChain run_chain(const Target& target, const ChainConfig& cfg) {
  check_config(cfg);
  SplitMix64 rng(cfg.seed);
  Eigen::VectorXd state = init_state(target, cfg, rng);
  double log_l = target.log_density(state.data());

  RunningCovariance cov(target.dim);
  cov.update(state);

  PosteriorChain chain;
  chain.names = target.names;
  chain.config = cfg;
  chain.draws.resize(cfg.iterations, target.dim);
  chain.log_density.resize(cfg.iterations);

  const int total = cfg.burn_in + cfg.iterations;
  for (int k = 1; k <= total; ++k) {
    Eigen::VectorXd cand = propose(state, k, cov, cfg, rng);
    const double log_l_cand = target.log_density(cand.data());
    const bool accepted = mh_accept(log_l, log_l_cand, rng);
    if (k <= cfg.adapt_start) {
      ++chain.proposals_fixed;
      chain.accepted_fixed += accepted;
    } else {
      ++chain.proposals_adaptive;
      chain.accepted_adaptive += accepted;
    }
    if (accepted) {
      state = cand;
      log_l = log_l_cand;
    }
    cov.update(state);
    if (k > cfg.burn_in) {
      const int row = k - cfg.burn_in - 1;
      chain.draws.row(row) = state.transpose();
      chain.log_density[row] = log_l;
    }
  }
  chain.final_covariance = cov.covariance();
  return chain;
}

namespace {

// Sample mean and sd (n-1) of a series; the moment anchors for start values.
void series_moments(const AnnualSeries& s, double& mean, double& sd) {
  const int n = s.span();
  double sum = 0;
  for (double v : s.values) sum += v;
  mean = sum / n;
  double ss = 0;
  for (double v : s.values) ss += (v - mean) * (v - mean);
  sd = (n > 1) ? std::sqrt(ss / (n - 1)) : 0.0;
}

}  // namespace

Target gevr_target(const AnnualSeries& s, const TrendWindow& w) {
  if (s.span() < 2) throw validation_error("gevr target: series too short");
  double m = 0, sd = 0;
  series_moments(s, m, sd);
  Target t;
  t.dim = 6;
  t.names = {"mu0", "mu1", "sigma0", "sigma1", "xi0", "xi1"};
  t.log_density = [s, w](const double* th) {
    GevrParams p{th[0], th[1], th[2], th[3], th[4], th[5]};
    if (!gevr_in_prior_support(p, w)) return kNegInf;
    return gevr_log_likelihood(s, p, w);
  };
  t.draw_init = [m, sd](SplitMix64& rng, double* th) {
    th[0] = m + 0.25 * sd * rng.normal();               // mu0 near sample mean
    th[1] = 0.1 * sd * rng.normal();                    // trends near zero
    th[2] = sd * std::exp(0.25 * rng.normal());         // sigma0 near sample sd
    th[3] = 0.05 * sd * rng.normal();
    th[4] = kXiLower + (kXiUpper - kXiLower) * rng.uniform();  // xi uniform on support
    th[5] = 0.05 * rng.normal();
  };
  return t;
}

Target nhgr_target(const AnnualSeries& s, const TrendWindow& w,
                   bool require_positive_mean) {
  if (s.span() < 2) throw validation_error("nhgr target: series too short");
  double m = 0, sd = 0;
  series_moments(s, m, sd);
  Target t;
  t.dim = 4;
  t.names = {"alpha0", "alpha1", "beta0", "beta1"};
  t.log_density = [s, w, require_positive_mean](const double* th) {
    NhgrParams p{th[0], th[1], th[2], th[3]};
    if (!nhgr_in_prior_support(p, w, require_positive_mean)) return kNegInf;
    return nhgr_log_likelihood(s, p, w, require_positive_mean);
  };
  t.draw_init = [m, sd](SplitMix64& rng, double* th) {
    th[0] = m + 0.25 * sd * rng.normal();
    th[1] = 0.1 * sd * rng.normal();
    th[2] = sd * std::exp(0.25 * rng.normal());
    th[3] = 0.05 * sd * rng.normal();
  };
  return t;
}

FunctionalDraws posterior_functional(
    const PosteriorChain& chain,
    const std::function<Extrapolated(const double*)>& f) {
  if (chain.draws.rows() == 0) throw user_error("posterior_functional: empty chain");
  FunctionalDraws out;
  out.values.reserve(chain.draws.rows());
  Eigen::VectorXd row(chain.draws.cols());
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    row = chain.draws.row(i);
    Extrapolated e = f(row.data());
    if (e.valid)
      out.values.push_back(e.value);
    else
      ++out.excluded;
  }
  if (out.values.empty())
    throw numeric_error("posterior_functional: no draw evaluated validly");
  return out;
}

}  // namespace climex
