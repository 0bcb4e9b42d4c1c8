#pragma once

#include <Eigen/Dense>
#include <functional>

#include "climex/gevr.hpp"
#include "climex/nhgr.hpp"
#include "climex/rng.hpp"
#include "climex/types.hpp"

namespace climex {

struct ChainConfig {
  int adapt_start = 2000;  // n_S: last iteration of the fixed-proposal phase
  int burn_in = 5000;      // n_B: discarded iterations
  int iterations = 10000;  // n_I: retained draws
  double beta_mix = 0.05;  // small-step mixture weight in the adaptive phase
  double fixed_step_sd = 0.1;
  double small_step_sd = 0.1;
  bool literal_proposal = false;  // 2.38^2*Sigma and (0.1^2/4)*I, no /d scaling
  uint64_t seed = 0;
  int init_retries = 1000;
};

// A generic sampling target: log density with -inf outside support, plus a
// raw start sampler (the engine retries until the density is finite).
struct Target {
  int dim = 0;
  std::vector<std::string> names;
  std::function<double(const double*)> log_density;
  std::function<void(SplitMix64&, double*)> draw_init;
};

// Streaming mean/covariance over the chain history; matches the batch
// sample covariance (n-1 denominator) to tight tolerance.
class RunningCovariance {
 public:
  explicit RunningCovariance(int dim);
  void update(const Eigen::VectorXd& x);
  int count() const { return n_; }
  Eigen::VectorXd mean() const { return mean_; }
  Eigen::MatrixXd covariance() const;

 private:
  int n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

enum class Phase { fixed, adaptive };

struct PosteriorChain {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;            // iterations x dim
  std::vector<double> log_density;  // finite for every retained draw
  long accepted_fixed = 0, proposals_fixed = 0;
  long accepted_adaptive = 0, proposals_adaptive = 0;
  Eigen::MatrixXd final_covariance;
  ChainConfig config;
};

double acceptance_rate(const PosteriorChain& chain, Phase phase);

// One proposal. Fixed phase (k <= adapt_start): current + N(0, sd^2 I).
// Adaptive phase: mixture of N(current, (2.38^2/d) Sigma) with weight
// 1-beta and N(current, (small_sd^2/d) I) with weight beta; the literal
// switch drops /d on the big step and uses small_sd^2/4 on the small one.
// Sigma gets +1e-10 I before factorization; a failed factorization falls
// back to the fixed-step component.
Eigen::VectorXd propose(const Eigen::VectorXd& current, int k,
                        const RunningCovariance& cov, const ChainConfig& cfg,
                        SplitMix64& rng);

// Accept with probability min(1, exp(log_l_candidate - log_l_current));
// -inf candidates can never be accepted. Consumes exactly one uniform.
bool mh_accept(double log_l_current, double log_l_candidate, SplitMix64& rng);

// Start value with finite log density, bounded retries.
Eigen::VectorXd init_state(const Target& target, const ChainConfig& cfg,
                           SplitMix64& rng);

// Adaptive Metropolis-Hastings: burn_in + iterations steps, retaining the
// last `iterations` states (rejected steps repeat the current state).
// Deterministic in (target data, cfg, seed).
PosteriorChain run_chain(const Target& target, const ChainConfig& cfg);

Target gevr_target(const AnnualSeries& s, const TrendWindow& w);
Target nhgr_target(const AnnualSeries& s, const TrendWindow& w,
                   bool require_positive_mean = true);

struct FunctionalDraws {
  std::vector<double> values;
  int excluded = 0;  // draws whose functional was flagged invalid
};

// Applies f per retained draw, excluding and counting invalid evaluations.
// Throws numeric_error if no draw evaluates validly.
FunctionalDraws posterior_functional(
    const PosteriorChain& chain,
    const std::function<Extrapolated(const double*)>& f);

}  // namespace climex
