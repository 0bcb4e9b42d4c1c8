#include "climex/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "climex/parallel.hpp"

namespace climex {

void check_spec(const SyntheticSpec& spec) {
  if (spec.n_replicates < 1)
    throw user_error("synthetic spec: n_replicates must be >= 1");
  if (spec.window.span < 2)
    throw validation_error("synthetic spec: span must be >= 2");
  if (spec.model == SimModel::gevr) {
    if (!gevr_in_prior_support(spec.gevr_truth, spec.window))
      throw validation_error("synthetic spec: truth outside the prior support "
                             "(needs sigma_t > 0 and xi_t in (-1, 0.2) at both "
                             "window endpoints)");
  } else {
    if (!nhgr_in_prior_support(spec.nhgr_truth, spec.window, false))
      throw validation_error(
          "synthetic spec: truth needs beta_t > 0 at both window endpoints");
  }
}

double gev_sample(double mu, double sigma, double xi, SplitMix64& rng) {
  if (!(sigma > 0)) throw numeric_error("gev_sample: sigma must be positive");
  const double e = -std::log(rng.uniform());  // Exp(1)
  if (std::abs(xi) < kXiZeroTol) return mu - sigma * std::log(e);
  return mu + sigma / xi * (std::pow(e, -xi) - 1.0);
}

AnnualSeries gen_gevr_series(const GevrParams& truth, const TrendWindow& w,
                             const DatasetKey& key, SplitMix64& rng) {
  AnnualSeries s;
  s.key = key;
  s.base_year = w.base_year;
  s.values.resize(w.span);
  for (int i = 0; i < w.span; ++i) {
    const int t = w.base_year + i;
    s.values[i] = gev_sample(param_at(truth.mu0, truth.mu1, t, w),
                             param_at(truth.sigma0, truth.sigma1, t, w),
                             param_at(truth.xi0, truth.xi1, t, w), rng);
  }
  return s;
}

AnnualSeries gen_nhgr_series(const NhgrParams& truth, const TrendWindow& w,
                             const DatasetKey& key, SplitMix64& rng) {
  AnnualSeries s;
  s.key = key;
  s.base_year = w.base_year;
  s.values.resize(w.span);
  for (int i = 0; i < w.span; ++i) {
    const int t = w.base_year + i;
    const double beta = param_at(truth.beta0, truth.beta1, t, w);
    if (!(beta > 0)) throw numeric_error("gen_nhgr_series: beta_t <= 0");
    s.values[i] =
        param_at(truth.alpha0, truth.alpha1, t, w) + beta * rng.normal();
  }
  return s;
}

std::vector<AnnualSeries> gen_series(const SyntheticSpec& spec) {
  check_spec(spec);
  std::vector<AnnualSeries> out;
  out.reserve(spec.n_replicates);
  for (int r = 0; r < spec.n_replicates; ++r) {
    SplitMix64 rng = stream(spec.seed, static_cast<uint64_t>(r));
    DatasetKey key = spec.key;
    key.ensemble.r = r + 1;
    out.push_back(spec.model == SimModel::gevr
                      ? gen_gevr_series(spec.gevr_truth, spec.window, key, rng)
                      : gen_nhgr_series(spec.nhgr_truth, spec.window, key, rng));
  }
  return out;
}

std::vector<LmmObs> gen_lmm_dataset(const LmmTruth& truth,
                                    const LmmDesign& design, uint64_t seed) {
  if (design.n_scenarios < 1 || design.n_scenarios > 3)
    throw user_error("lmm design: n_scenarios must be 1..3");
  if (design.n_models < 1 || design.n_ensembles < 1 || design.n_per_cell < 1)
    throw user_error("lmm design: counts must be >= 1");
  if (truth.tau_delta < 0 || truth.tau_zeta < 0 || truth.tau_eps < 0)
    throw validation_error("lmm truth: sds must be >= 0");
  if (truth.tau_delta > 0 && design.n_models < 2)
    throw validation_error(
        "lmm design: model effect requested with a single model");
  if (truth.tau_zeta > 0 && design.n_ensembles < 2)
    throw validation_error(
        "lmm design: ensemble effect requested with a single ensemble");

  SplitMix64 rng = stream(seed, 0);
  std::vector<double> delta(design.n_models);
  std::vector<double> zeta(static_cast<size_t>(design.n_models) *
                           design.n_ensembles);
  for (auto& d : delta) d = truth.tau_delta * rng.normal();
  for (auto& z : zeta) z = truth.tau_zeta * rng.normal();

  std::vector<LmmObs> obs;
  obs.reserve(static_cast<size_t>(design.n_scenarios) * design.n_models *
              design.n_ensembles * design.n_per_cell);
  for (int j = 0; j < design.n_scenarios; ++j)
    for (int k = 0; k < design.n_models; ++k)
      for (int l = 0; l < design.n_ensembles; ++l)
        for (int i = 0; i < design.n_per_cell; ++i) {
          LmmObs o;
          o.scenario = j + 1;
          o.model = k + 1;
          o.ensemble = l + 1;
          o.value = truth.iota + truth.gamma[j] + delta[k] +
                    zeta[k * design.n_ensembles + l] +
                    truth.tau_eps * rng.normal();
          obs.push_back(o);
        }
  return obs;
}

BinomialInterval wilson_interval(int successes, int n) {
  if (n <= 0 || successes < 0 || successes > n)
    throw user_error("wilson_interval: need 0 <= successes <= n, n > 0");
  const double z = 1.959963984540054;  // 97.5% normal quantile
  const double nn = n;
  const double p = successes / nn;
  const double denom = 1.0 + z * z / nn;
  const double center = (p + z * z / (2 * nn)) / denom;
  const double half =
      z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  // degenerate counts hit the boundary exactly; avoid rounding residue
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {p, lo, hi};
}

namespace {

// Type-7 quantile of an already sorted vector.
double sorted_quantile(const std::vector<double>& v, double p) {
  const double h = p * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

struct ReplicateOutcome {
  std::vector<uint8_t> covered;
  bool ok = false;
};

}  // namespace

CoverageReport coverage_experiment(const SyntheticSpec& spec,
                                   const ChainConfig& cfg, int n_datasets,
                                   const ReturnSpec& rspec, double level,
                                   int jobs) {
  check_spec(spec);
  if (n_datasets < 1) throw user_error("coverage_experiment: n_datasets >= 1");
  if (!(level > 0 && level < 1))
    throw user_error("coverage_experiment: level must lie in (0, 1)");

  const bool is_gevr = spec.model == SimModel::gevr;
  std::vector<std::string> names =
      is_gevr ? std::vector<std::string>{"mu0", "mu1", "sigma0",
                                         "sigma1", "xi0", "xi1"}
              : std::vector<std::string>{"alpha0", "alpha1", "beta0", "beta1"};
  std::vector<double> truth =
      is_gevr ? std::vector<double>{spec.gevr_truth.mu0, spec.gevr_truth.mu1,
                                    spec.gevr_truth.sigma0,
                                    spec.gevr_truth.sigma1, spec.gevr_truth.xi0,
                                    spec.gevr_truth.xi1}
              : std::vector<double>{spec.nhgr_truth.alpha0,
                                    spec.nhgr_truth.alpha1,
                                    spec.nhgr_truth.beta0,
                                    spec.nhgr_truth.beta1};
  const int dim = static_cast<int>(truth.size());

  double true_delta;
  if (is_gevr) {
    const Extrapolated d = delta_q(spec.gevr_truth, spec.window, rspec);
    if (!d.valid)
      throw validation_error(
          "coverage_experiment: truth has no valid change functional");
    true_delta = d.value;
  } else {
    true_delta = delta_m_parametric(spec.nhgr_truth, spec.window);
  }
  names.push_back("delta");
  truth.push_back(true_delta);

  const double p_lo = (1.0 - level) / 2.0;
  std::vector<ReplicateOutcome> outcomes(n_datasets);
  parallel_for(n_datasets, jobs, [&](int r) {
    ReplicateOutcome& out = outcomes[r];
    out.covered.assign(dim + 1, 0);
    try {
      SplitMix64 data_rng = stream(spec.seed, static_cast<uint64_t>(r));
      DatasetKey key = spec.key;
      key.ensemble.r = r + 1;
      const AnnualSeries s =
          is_gevr ? gen_gevr_series(spec.gevr_truth, spec.window, key, data_rng)
                  : gen_nhgr_series(spec.nhgr_truth, spec.window, key, data_rng);
      ChainConfig ccfg = cfg;
      ccfg.seed =
          stream(~spec.seed, static_cast<uint64_t>(r)).next_u64() ^ cfg.seed;
      const Target target = is_gevr ? gevr_target(s, spec.window)
                                    : nhgr_target(s, spec.window, false);
      const PosteriorChain chain = run_chain(target, ccfg);

      std::vector<double> column(chain.draws.rows());
      for (int j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < chain.draws.rows(); ++i)
          column[i] = chain.draws(i, j);
        std::sort(column.begin(), column.end());
        const double lo = sorted_quantile(column, p_lo);
        const double hi = sorted_quantile(column, 1.0 - p_lo);
        out.covered[j] = (lo <= truth[j] && truth[j] <= hi) ? 1 : 0;
      }
      const TrendWindow w = spec.window;
      const FunctionalDraws fd = posterior_functional(
          chain, [&](const double* th) -> Extrapolated {
            if (is_gevr) {
              GevrParams g{th[0], th[1], th[2], th[3], th[4], th[5]};
              return delta_q(g, w, rspec);
            }
            NhgrParams nh{th[0], th[1], th[2], th[3]};
            return Extrapolated{delta_m_parametric(nh, w), true, 0, 0};
          });
      std::vector<double> deltas = fd.values;
      std::sort(deltas.begin(), deltas.end());
      const double lo = sorted_quantile(deltas, p_lo);
      const double hi = sorted_quantile(deltas, 1.0 - p_lo);
      out.covered[dim] = (lo <= true_delta && true_delta <= hi) ? 1 : 0;
      out.ok = true;
    } catch (const std::exception&) {
      out.ok = false;  // counted below; a failed fit covers nothing
    }
  });

  CoverageReport report;
  report.n_datasets = n_datasets;
  report.level = level;
  for (int j = 0; j <= dim; ++j) {
    ParamCoverage pc;
    pc.name = names[j];
    for (const auto& out : outcomes) {
      if (!out.ok) continue;
      pc.evaluated += 1;
      pc.covered += out.covered[j];
    }
    if (pc.evaluated > 0) pc.ci = wilson_interval(pc.covered, pc.evaluated);
    report.params.push_back(std::move(pc));
  }
  for (const auto& out : outcomes)
    if (!out.ok) report.failed_fits += 1;
  return report;
}

}  // namespace climex
