#include "climex/synoptic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

namespace climex {

namespace {
constexpr double kQuietNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kVarianceFloor = 1e-300;  // keeps logs finite on degenerate data
}  // namespace

WeightedDraws pool_equal_weight(const std::vector<DeltaDraws>& groups) {
  if (groups.empty()) throw user_error("pool_equal_weight: no draw groups given");
  std::map<std::string, int> entries_per_gcm;
  for (const auto& g : groups) {
    if (g.draws.empty())
      throw validation_error("pool_equal_weight: empty draw set for " + encode_key(g.key));
    entries_per_gcm[g.key.gcm] += 1;
  }
  const double n_gcms = static_cast<double>(entries_per_gcm.size());
  WeightedDraws out;
  size_t total = 0;
  for (const auto& g : groups) total += g.draws.size();
  out.values.reserve(total);
  out.weights.reserve(total);
  for (const auto& g : groups) {
    const double w = 1.0 / n_gcms / entries_per_gcm[g.key.gcm] /
                     static_cast<double>(g.draws.size());
    for (double v : g.draws) {
      out.values.push_back(v);
      out.weights.push_back(w);
    }
  }
  double sum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) w /= sum;
  return out;
}

double expected_change(const WeightedDraws& pooled) {
  if (pooled.values.empty()) throw user_error("expected_change: empty pool");
  double num = 0, den = 0;
  for (size_t i = 0; i < pooled.values.size(); ++i) {
    num += pooled.weights[i] * pooled.values[i];
    den += pooled.weights[i];
  }
  return num / den;
}

double prob_positive(const WeightedDraws& pooled) {
  if (pooled.values.empty()) throw user_error("prob_positive: empty pool");
  double num = 0, den = 0;
  for (size_t i = 0; i < pooled.values.size(); ++i) {
    if (pooled.values[i] > 0.0) num += pooled.weights[i];
    den += pooled.weights[i];
  }
  return num / den;
}

namespace {

// Weighted generalization of the type-7 quantile: positions
// s_k = k*w_k + (n-1)*cum_{k-1} on the sorted sample, target p*(n-1)*W,
// linear interpolation between bracketing positions. Equal weights reduce
// exactly to h = (n-1)p order-statistic interpolation.
double quantile_sorted(const std::vector<double>& v, const std::vector<double>& w,
                       double p) {
  const size_t n = v.size();
  if (n == 1) return v[0];
  const double nm1 = static_cast<double>(n - 1);
  double wsum = 0;
  for (double x : w) wsum += x;
  const double target = p * nm1 * wsum;
  double cum_prev = 0;  // cumulative weight before index k
  double s_prev = 0;    // position at k-1 (s_0 = 0 at k=0)
  if (target <= 0) return v[0];
  if (p >= 1.0) return v[n - 1];  // exact extremes, no rounding drift
  for (size_t k = 1; k < n; ++k) {
    cum_prev += w[k - 1];
    const double s_k = static_cast<double>(k) * w[k] + nm1 * cum_prev;
    if (target <= s_k) {
      const double ds = s_k - s_prev;
      if (ds <= 0) return v[k];
      return v[k - 1] + (target - s_prev) / ds * (v[k] - v[k - 1]);
    }
    s_prev = s_k;
  }
  return v[n - 1];
}

void sorted_pool(const WeightedDraws& pooled, std::vector<double>& v,
                 std::vector<double>& w) {
  std::vector<size_t> idx(pooled.values.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return pooled.values[a] < pooled.values[b];
  });
  v.resize(idx.size());
  w.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    v[i] = pooled.values[idx[i]];
    w[i] = pooled.weights[idx[i]];
  }
}

}  // namespace

double weighted_quantile(const WeightedDraws& pooled, double p) {
  if (pooled.values.empty()) throw user_error("weighted_quantile: empty pool");
  if (!(p >= 0.0 && p <= 1.0)) throw user_error("weighted_quantile: p outside [0,1]");
  std::vector<double> v, w;
  sorted_pool(pooled, v, w);
  return quantile_sorted(v, w, p);
}

QuantileSummary quantile_summary(const WeightedDraws& pooled) {
  if (pooled.values.empty()) throw user_error("quantile_summary: empty pool");
  std::vector<double> v, w;
  sorted_pool(pooled, v, w);
  QuantileSummary q;
  q.mean = expected_change(pooled);
  q.q025 = quantile_sorted(v, w, 0.025);
  q.q25 = quantile_sorted(v, w, 0.25);
  q.median = quantile_sorted(v, w, 0.5);
  q.q75 = quantile_sorted(v, w, 0.75);
  q.q975 = quantile_sorted(v, w, 0.975);
  return q;
}

// ---------------------------------------------------------------------------
// Mixed model machinery. Observations collapse to per-cell sufficient
// statistics; the marginal covariance of the nested two-level design is
// inverted group-by-group with rank-one identities, so one likelihood
// evaluation costs O(#cells).

namespace {

struct CellStat {
  double n = 0, mean = 0, ss = 0;  // within-cell count, mean, sum of squares
};

struct EnsGroup {
  double n = 0;
  CellStat cell[3];  // per scenario index - 1; n == 0 means absent
};

struct LmmData {
  std::vector<std::vector<EnsGroup>> models;  // ensemble groups per model
  bool scen_present[3] = {false, false, false};
  long n_obs = 0;
  double y_mean = 0, y_ss = 0;  // global moments (for tau_R)
  int n_cols = 1;
  int col_of_scen[3] = {0, -1, -1};  // X column per scenario (0 = intercept only)
};

void welford_add(CellStat& c, double y) {
  c.n += 1;
  const double d = y - c.mean;
  c.mean += d / c.n;
  c.ss += d * (y - c.mean);
}

LmmData collapse(const std::vector<LmmObs>& obs) {
  if (obs.empty()) throw validation_error("mixed model: no observations");
  std::map<std::pair<int, int>, EnsGroup> groups;  // deterministic order
  LmmData data;
  CellStat global;
  for (const auto& o : obs) {
    if (o.scenario < 1 || o.scenario > 3)
      throw validation_error("mixed model: scenario index must be 1, 2 or 3");
    if (!std::isfinite(o.value))
      throw validation_error("mixed model: non-finite response value");
    auto& g = groups[{o.model, o.ensemble}];
    welford_add(g.cell[o.scenario - 1], o.value);
    g.n += 1;
    welford_add(global, o.value);
    data.scen_present[o.scenario - 1] = true;
  }
  data.n_obs = static_cast<long>(obs.size());
  data.y_mean = global.mean;
  data.y_ss = global.ss;

  int cur_model = 0;
  bool first = true;
  int last_model_label = 0;
  for (auto& [key, group] : groups) {
    if (first || key.first != last_model_label) {
      data.models.emplace_back();
      last_model_label = key.first;
      first = false;
      (void)cur_model;
    }
    data.models.back().push_back(group);
  }
  int col = 1;
  for (int j = 1; j < 3; ++j) {
    if (data.scen_present[j]) data.col_of_scen[j] = col++;
  }
  data.n_cols = col;
  return data;
}

struct Gram {
  Eigen::MatrixXd mxx;  // X' W^-1 X
  Eigen::VectorXd mxy;  // X' W^-1 y
  double myy = 0;       // y' W^-1 y
  double logdet_w = 0;
};

// X row for a cell: intercept plus indicator of its scenario's column.
// u-sums below exploit that X is cell-constant.
Gram eval_gram(const LmmData& data, double r_delta, double r_zeta) {
  const int p = data.n_cols;
  Gram gram;
  gram.mxx = Eigen::MatrixXd::Zero(p, p);
  gram.mxy = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd x_cell(p);

  Eigen::MatrixXd mxx_g(p, p);
  Eigen::VectorXd mxy_g(p);
  Eigen::VectorXd ax(p);  // per-model X' A^-1 1
  for (const auto& model : data.models) {
    mxx_g.setZero();
    mxy_g.setZero();
    ax.setZero();
    double ay = 0;       // y' A^-1 1
    double s_model = 0;  // 1' A^-1 1
    double myy_model = 0;
    for (const auto& group : model) {
      const double shrink = r_zeta / (1.0 + group.n * r_zeta);
      gram.logdet_w += std::log1p(group.n * r_zeta);
      s_model += group.n / (1.0 + group.n * r_zeta);
      Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
      double ysum = 0, yy = 0;
      Eigen::MatrixXd xx = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd xy = Eigen::VectorXd::Zero(p);
      for (int j = 0; j < 3; ++j) {
        const CellStat& c = group.cell[j];
        if (c.n == 0) continue;
        x_cell.setZero();
        x_cell[0] = 1.0;
        if (data.col_of_scen[j] > 0) x_cell[data.col_of_scen[j]] = 1.0;
        xsum.noalias() += c.n * x_cell;
        ysum += c.n * c.mean;
        yy += c.ss + c.n * c.mean * c.mean;
        xx.noalias() += c.n * x_cell * x_cell.transpose();
        xy.noalias() += c.n * c.mean * x_cell;
      }
      mxx_g.noalias() += xx - shrink * xsum * xsum.transpose();
      mxy_g.noalias() += xy - shrink * ysum * xsum;
      myy_model += yy - shrink * ysum * ysum;
      ax.noalias() += xsum / (1.0 + group.n * r_zeta);
      ay += ysum / (1.0 + group.n * r_zeta);
    }
    const double h = r_delta / (1.0 + r_delta * s_model);
    gram.logdet_w += std::log1p(r_delta * s_model);
    gram.mxx.noalias() += mxx_g - h * ax * ax.transpose();
    gram.mxy.noalias() += mxy_g - h * ay * ax;
    gram.myy += myy_model - h * ay * ay;
  }
  return gram;
}

struct ProfiledFit {
  double negloglik = 0;  // objective being minimized (ML or REML)
  double sigma2_ml = 0;  // q/N regardless of criterion (reporting convention)
  double loglik_ml = 0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov_unit;  // (X'W^-1X)^-1, scale by sigma2 for Var(beta)
};

ProfiledFit profile_at(const LmmData& data, double r_delta, double r_zeta,
                       bool reml) {
  const Gram gram = eval_gram(data, r_delta, r_zeta);
  const double n = static_cast<double>(data.n_obs);
  const double p = static_cast<double>(data.n_cols);
  ProfiledFit fit;
  Eigen::LLT<Eigen::MatrixXd> llt(gram.mxx);
  if (llt.info() != Eigen::Success)
    throw numeric_error("mixed model: singular fixed-effect system");
  fit.beta = llt.solve(gram.mxy);
  fit.beta_cov_unit =
      llt.solve(Eigen::MatrixXd::Identity(data.n_cols, data.n_cols));
  double q = gram.myy - fit.beta.dot(gram.mxy);
  q = std::max(q, 0.0);
  fit.sigma2_ml = std::max(q / n, kVarianceFloor);
  fit.loglik_ml = -0.5 * (n * kLogTwoPi + n * std::log(fit.sigma2_ml) +
                          gram.logdet_w + n);
  if (!reml) {
    fit.negloglik = -fit.loglik_ml;
  } else {
    const double df = n - p;
    const double sigma2_reml = std::max(q / df, kVarianceFloor);
    double logdet_mxx = 0;
    for (int i = 0; i < data.n_cols; ++i)
      logdet_mxx += 2.0 * std::log(llt.matrixL()(i, i));
    fit.negloglik = 0.5 * (df * kLogTwoPi + df * std::log(sigma2_reml) +
                           gram.logdet_w + logdet_mxx + df);
  }
  return fit;
}

// Deterministic Nelder-Mead on R^d, d in {1,2}; boundary zeros are reachable
// because the caller optimizes over s with variance ratios r = s^2.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            Eigen::VectorXd start, double step, int max_iter) {
  const int d = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> x(d + 1, start);
  std::vector<double> fx(d + 1);
  for (int i = 1; i <= d; ++i) x[i][i - 1] += step;
  for (int i = 0; i <= d; ++i) fx[i] = f(x[i]);
  std::vector<int> order(d + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fx[a] < fx[b]; });
    const int best = order[0], worst = order[d], second = order[d - 1];
    if (std::abs(fx[worst] - fx[best]) < 1e-12 &&
        (x[worst] - x[best]).cwiseAbs().maxCoeff() < 1e-10)
      break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= d; ++i)
      if (i != worst) centroid += x[i];
    centroid /= static_cast<double>(d);
    Eigen::VectorXd xr = centroid + (centroid - x[worst]);
    const double fr = f(xr);
    if (fr < fx[order[0]]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - x[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        x[worst] = xe;
        fx[worst] = fe;
      } else {
        x[worst] = xr;
        fx[worst] = fr;
      }
    } else if (fr < fx[second]) {
      x[worst] = xr;
      fx[worst] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (x[worst] - centroid);
      const double fc = f(xc);
      if (fc < fx[worst]) {
        x[worst] = xc;
        fx[worst] = fc;
      } else {
        for (int i = 0; i <= d; ++i) {
          if (i == best) continue;
          x[i] = x[best] + 0.5 * (x[i] - x[best]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  int best = 0;
  for (int i = 1; i <= d; ++i)
    if (fx[i] < fx[best]) best = i;
  return x[best];
}

}  // namespace

LmmFit lmm_fit(const std::vector<LmmObs>& obs, bool reml) {
  LmmData data = collapse(obs);
  if (!data.scen_present[0])
    throw validation_error("mixed model: reference scenario 1 absent");
  size_t max_groups = 0;
  for (const auto& m : data.models) max_groups = std::max(max_groups, m.size());
  if (data.models.size() < 2 && max_groups < 2)
    throw validation_error(
        "mixed model: single model with a single ensemble; model and ensemble "
        "variance components are unidentifiable");

  const auto objective = [&](double r_delta, double r_zeta) {
    return profile_at(data, r_delta, r_zeta, reml).negloglik;
  };

  // Candidate optima: both ratios pinned at zero, each axis alone, and the
  // full two-ratio search; squared parameterization keeps ratios >= 0 and
  // makes boundary zeros ordinary interior points of the search space.
  double best_rd = 0, best_rz = 0;
  double best_val = objective(0, 0);
  const auto consider = [&](double rd, double rz) {
    const double val = objective(rd, rz);
    if (val < best_val - 1e-12) {
      best_val = val;
      best_rd = rd;
      best_rz = rz;
    }
  };
  const double axis_starts[3] = {0.3, 1.0, 2.5};
  for (double s0 : axis_starts) {
    Eigen::VectorXd s(1);
    s[0] = s0;
    Eigen::VectorXd sz = nelder_mead(
        [&](const Eigen::VectorXd& v) { return objective(0, v[0] * v[0]); }, s,
        0.4, 200);
    consider(0, sz[0] * sz[0]);
    Eigen::VectorXd sd = nelder_mead(
        [&](const Eigen::VectorXd& v) { return objective(v[0] * v[0], 0); }, s,
        0.4, 200);
    consider(sd[0] * sd[0], 0);
  }
  const double plane_starts[5][2] = {
      {0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}, {0.2, 1.5}, {1.5, 0.2}};
  for (const auto& s0 : plane_starts) {
    Eigen::VectorXd s(2);
    s[0] = s0[0];
    s[1] = s0[1];
    Eigen::VectorXd sbest = nelder_mead(
        [&](const Eigen::VectorXd& v) {
          return objective(v[0] * v[0], v[1] * v[1]);
        },
        s, 0.4, 400);
    consider(sbest[0] * sbest[0], sbest[1] * sbest[1]);
  }
  if (best_rd < 1e-10) best_rd = 0;
  if (best_rz < 1e-10) best_rz = 0;

  const ProfiledFit fit = profile_at(data, best_rd, best_rz, reml);
  LmmFit out;
  out.reml = reml;
  out.n_obs = data.n_obs;
  // Reported sds use the ML convention (divide by N) regardless of the
  // estimation criterion: keeps tau_eps <= tau_FE <= tau_R a theorem.
  out.tau_eps = std::sqrt(fit.sigma2_ml);
  out.tau_delta = std::sqrt(best_rd * fit.sigma2_ml);
  out.tau_zeta = std::sqrt(best_rz * fit.sigma2_ml);
  out.tau_r = std::sqrt(data.y_ss / static_cast<double>(data.n_obs));
  out.tau_fe = fe_only_fit(obs).tau_fe;
  out.log_likelihood = fit.loglik_ml;

  out.iota_plus_g1 = fit.beta[0];
  out.se_iota_plus_g1 = std::sqrt(fit.sigma2_ml * fit.beta_cov_unit(0, 0));
  if (data.col_of_scen[1] > 0) {
    const int c = data.col_of_scen[1];
    out.g2_minus_g1 = fit.beta[c];
    out.se_g2_minus_g1 = std::sqrt(fit.sigma2_ml * fit.beta_cov_unit(c, c));
  } else {
    out.g2_minus_g1 = kQuietNan;
    out.se_g2_minus_g1 = kQuietNan;
  }
  if (data.col_of_scen[2] > 0) {
    const int c = data.col_of_scen[2];
    out.g3_minus_g1 = fit.beta[c];
    out.se_g3_minus_g1 = std::sqrt(fit.sigma2_ml * fit.beta_cov_unit(c, c));
  } else {
    out.g3_minus_g1 = kQuietNan;
    out.se_g3_minus_g1 = kQuietNan;
  }
  if (out.tau_r > 0) {
    auto [r2fe, r2me] = r_squared(out.tau_r, out.tau_fe, out.tau_eps);
    out.r2_fe = r2fe;
    out.r2_me = r2me;
  } else {
    out.r2_fe = kQuietNan;
    out.r2_me = kQuietNan;
  }
  return out;
}

FeFit fe_only_fit(const std::vector<LmmObs>& obs) {
  if (obs.empty()) throw validation_error("fixed-effect fit: no observations");
  CellStat per_scen[3];
  for (const auto& o : obs) {
    if (o.scenario < 1 || o.scenario > 3)
      throw validation_error("fixed-effect fit: scenario index must be 1, 2 or 3");
    welford_add(per_scen[o.scenario - 1], o.value);
  }
  int ref = -1;
  for (int j = 0; j < 3; ++j)
    if (per_scen[j].n > 0) {
      ref = j;
      break;
    }
  FeFit out;
  out.n_obs = static_cast<long>(obs.size());
  double rss = per_scen[0].ss + per_scen[1].ss + per_scen[2].ss;
  const double n = static_cast<double>(obs.size());
  const double sigma2 = std::max(rss / n, kVarianceFloor);
  out.tau_fe = std::sqrt(rss / n);
  out.log_likelihood = -0.5 * n * (kLogTwoPi + std::log(sigma2) + 1.0);
  out.iota_plus_g1 = per_scen[ref].mean;
  out.g2_minus_g1 =
      (per_scen[1].n > 0 && ref != 1) ? per_scen[1].mean - per_scen[ref].mean : kQuietNan;
  out.g3_minus_g1 =
      (per_scen[2].n > 0 && ref != 2) ? per_scen[2].mean - per_scen[ref].mean : kQuietNan;
  return out;
}

std::pair<double, double> r_squared(double tau_r, double tau_fe, double tau_eps) {
  if (!(tau_r > 0)) throw numeric_error("r_squared: tau_r must be positive");
  const double fe = tau_fe / tau_r;
  const double me = tau_eps / tau_r;
  return {1.0 - fe * fe, 1.0 - me * me};
}

}  // namespace climex
