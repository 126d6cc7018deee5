#include "deltalab/signatures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"
#include "deltalab/stats.hpp"

namespace deltalab {

namespace {

// Stream tags keep the substreams of different tests apart for one seed.
enum : std::uint64_t {
  kStreamDependence = 1,
  kStreamDependencePower,
  kStreamSkewBootstrap,
  kStreamPathBias,
  kStreamPathPower,
  kStreamBudget,
  kStreamFraming,
  kStreamFramingPower,
};

double permutation_p(std::size_t extreme, int permutations) {
  return (1.0 + static_cast<double>(extreme)) / (1.0 + permutations);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto eng = make_engine(seed);
  std::shuffle(idx.begin(), idx.end(), eng);
  return idx;
}

Eigen::MatrixXd design_matrix(const std::vector<Feature>& features, std::size_t n, std::vector<std::string>& names) {
  std::vector<Eigen::VectorXd> cols;
  names = {"(intercept)"};
  cols.emplace_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  for (const auto& f : features) {
    if (f.categorical()) {
      if (f.levels.size() != n) throw Error("InvalidInputs", "feature '" + f.name + "' has wrong length");
      std::set<std::string> levels(f.levels.begin(), f.levels.end());
      if (levels.size() < 2) throw Error("RankDeficient", "categorical feature '" + f.name + "' is constant");
      for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) c(static_cast<Eigen::Index>(i)) = f.levels[i] == *it ? 1.0 : 0.0;
        cols.push_back(std::move(c));
        names.push_back(f.name + "=" + *it);
      }
    } else {
      if (f.numeric.size() != n) throw Error("InvalidInputs", "feature '" + f.name + "' has wrong length");
      cols.emplace_back(Eigen::Map<const Eigen::VectorXd>(f.numeric.data(), static_cast<Eigen::Index>(n)));
      names.push_back(f.name);
    }
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = cols[j];
  return x;
}

struct LagFit {
  double lag_coef = 0.0;
  double granger_p = 1.0;
  bool ok = false;
};

// Regresses own[t] on own lags, the lagged opponent decision and the round
// index; optionally also the restricted model for the Granger F test.
LagFit fit_lag_model(std::span<const double> own, std::span<const double> opponent, int lags, bool use_opponent,
                     bool granger) {
  const auto T = static_cast<int>(own.size());
  const int rows = T - lags;
  const int p = 1 + lags + (use_opponent ? 1 : 0) + 1;
  Eigen::MatrixXd x(rows, p);
  Eigen::VectorXd y(rows);
  for (int t = lags; t < T; ++t) {
    const int r = t - lags;
    int c = 0;
    x(r, c++) = 1.0;
    for (int l = 1; l <= lags; ++l) x(r, c++) = own[static_cast<std::size_t>(t - l)];
    if (use_opponent) x(r, c++) = opponent[static_cast<std::size_t>(t - 1)];
    x(r, c++) = t + 1;
    y(r) = own[static_cast<std::size_t>(t)];
  }
  LagFit out;
  const Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
  const Eigen::VectorXd beta = ldlt.solve(x.transpose() * y);
  if (!beta.allFinite()) return out;
  out.lag_coef = beta(1);
  out.ok = true;
  if (granger) {
    const double rss_u = (y - x * beta).squaredNorm();
    Eigen::MatrixXd xr(rows, p - lags);
    xr.col(0) = x.col(0);
    xr.rightCols(p - lags - 1) = x.rightCols(p - lags - 1);
    const Eigen::VectorXd br = (xr.transpose() * xr).ldlt().solve(xr.transpose() * y);
    const double rss_r = (y - xr * br).squaredNorm();
    const double df2 = rows - p;
    if (rss_u > 0 && df2 > 0) {
      const double f = ((rss_r - rss_u) / lags) / (rss_u / df2);
      out.granger_p = stats::f_sf(f, lags, df2);
    }
  }
  return out;
}

bool varies(std::span<const double> v) {
  return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

}  // namespace

std::string to_string(Direction d) { return d == Direction::Left ? "Left" : "Right"; }

std::optional<Direction> predicted_direction(Framing f) {
  if (f == Framing::Gain) return Direction::Left;
  if (f == Framing::Loss) return Direction::Right;
  return std::nullopt;
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::HumanShaped: return "HumanShaped";
    case Classification::LLMShaped: return "LLMShaped";
    case Classification::Unstructured: return "Unstructured";
    case Classification::Mixed: return "Mixed";
  }
  return "Mixed";
}

// ---- conditional dependence ------------------------------------------------

SignatureResult test_conditional_dependence(std::span<const double> deltas, const std::vector<Feature>& features,
                                            const TestOptions& opts) {
  const std::size_t n = deltas.size();
  std::vector<std::string> names;
  const Eigen::MatrixXd x = design_matrix(features, n, names);
  const auto regressors = x.cols() - 1;
  if (regressors < 1) throw Error("InvalidInputs", "conditional dependence needs at least one feature");
  if (static_cast<Eigen::Index>(n) < 10 + regressors)
    throw Error("TooFewObservations", fmt::format("n = {} < 10 + {} regressors", n, regressors));

  const Eigen::Map<const Eigen::VectorXd> y(deltas.data(), static_cast<Eigen::Index>(n));
  const auto fit = stats::ols(x, y);  // RankDeficient surfaces here
  const double f = stats::overall_f(fit);

  SignatureResult r;
  r.test = "conditional_dependence";
  r.n = static_cast<int>(n);
  r.statistic = f;
  r.effect = fit.r2;
  r.details["f_p_value"] = stats::f_sf(f, static_cast<double>(regressors), fit.df_resid());
  r.details["regressors"] = static_cast<double>(regressors);
  for (Eigen::Index j = 1; j < x.cols(); ++j) r.details["coef:" + names[static_cast<std::size_t>(j)]] = fit.coef(j);

  if (fit.tss <= 0.0) {
    r.p_value = 1.0;
  } else {
    // ||Q'y||^2 is monotone in R^2 for a fixed design with intercept.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), x.cols());
    const double observed = (q.transpose() * y).squaredNorm();
    std::vector<char> extreme(static_cast<std::size_t>(std::max(opts.permutations, 0)), 0);
    stats::parallel_for(extreme.size(), [&](std::size_t b) {
      const auto idx = shuffled_indices(n, derive_seed(opts.seed, kStreamDependence, b));
      Eigen::VectorXd yp(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) yp(static_cast<Eigen::Index>(i)) = deltas[idx[i]];
      extreme[b] = (q.transpose() * yp).squaredNorm() >= observed * (1.0 - 1e-12);
    });
    r.p_value = permutation_p(static_cast<std::size_t>(std::count(extreme.begin(), extreme.end(), 1)),
                              opts.permutations);
  }
  r.flagged = *r.p_value < opts.alpha;

  if (opts.power_replicates > 0) {
    // Power of the analytic F test when the first regressor carries a
    // half-sd shift in delta.
    Eigen::VectorXd z = x.col(1);
    const double sd = std::sqrt((z.array() - z.mean()).square().sum() / (z.size() - 1.0));
    z = (z.array() - z.mean()) / sd;
    std::vector<char> reject(static_cast<std::size_t>(opts.power_replicates), 0);
    stats::parallel_for(reject.size(), [&](std::size_t b) {
      auto eng = make_engine(derive_seed(opts.seed, kStreamDependencePower, b));
      std::normal_distribution<double> noise;
      Eigen::VectorXd ys(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) ys(i) = 0.5 * z(i) + noise(eng);
      const auto sim = stats::ols(x, ys);
      reject[b] = stats::f_sf(stats::overall_f(sim), static_cast<double>(regressors), sim.df_resid()) < opts.alpha;
    });
    r.power_d05 = static_cast<double>(std::count(reject.begin(), reject.end(), 1)) / opts.power_replicates;
  }
  return r;
}

// ---- distributional asymmetry --------------------------------------------------

SignatureResult test_distributional_asymmetry(std::span<const double> deltas, Direction predicted,
                                              const TestOptions& opts) {
  const std::size_t n = deltas.size();
  if (n < 8) throw Error("TooFewObservations", fmt::format("skewness test needs n >= 8, got {}", n));
  if (!varies(deltas)) throw Error("ZeroVariance", "all deltas are equal");
  const double g1 = stats::adjusted_skewness(deltas);

  SignatureResult r;
  r.test = "distributional_asymmetry";
  r.n = static_cast<int>(n);
  r.statistic = g1;
  r.effect = g1;
  r.direction_predicted = to_string(predicted);
  r.direction_observed = g1 < 0 ? "Left" : (g1 > 0 ? "Right" : "None");
  const bool sign_ok = predicted == Direction::Left ? g1 < 0 : g1 > 0;
  r.flagged = std::fabs(g1) > kSkewThreshold && sign_ok;

  if (opts.bootstrap > 0) {
    std::vector<double> reps(static_cast<std::size_t>(opts.bootstrap), std::nan(""));
    stats::parallel_for(reps.size(), [&](std::size_t b) {
      auto eng = make_engine(derive_seed(opts.seed, kStreamSkewBootstrap, b));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      std::vector<double> sample(n);
      for (auto& v : sample) v = deltas[pick(eng)];
      if (varies(sample)) reps[b] = stats::adjusted_skewness(sample);
    });
    std::erase_if(reps, [](double v) { return std::isnan(v); });
    if (!reps.empty()) {
      r.ci95 = stats::percentile_interval(reps, 0.95);
      const auto below = static_cast<double>(std::count_if(reps.begin(), reps.end(), [](double v) { return v <= 0; }));
      const auto above = static_cast<double>(std::count_if(reps.begin(), reps.end(), [](double v) { return v >= 0; }));
      r.p_value = std::min(1.0, 2.0 * std::min(below, above) / static_cast<double>(reps.size()));
    }
  }
  return r;
}

// ---- path dependence -------------------------------------------------------

SignatureResult test_path_dependence(const std::vector<PathSeries>& sessions, const PathOptions& path,
                                     const TestOptions& opts) {
  if (path.lag_order < 1) throw Error("InvalidInputs", "lag order must be >= 1");
  for (const auto& s : sessions) {
    if (static_cast<int>(s.own.size()) < path.min_rounds)
      throw Error("SessionTooShort", fmt::format("session '{}' has {} rounds < {}", s.id, s.own.size(), path.min_rounds));
    if (!s.opponent.empty() && s.opponent.size() != s.own.size())
      throw Error("InvalidInputs", "opponent series length mismatch in '" + s.id + "'");
  }
  if (static_cast<int>(sessions.size()) < path.min_sessions)
    throw Error("InsufficientSessions", fmt::format("{} sessions < {}", sessions.size(), path.min_sessions));

  std::vector<double> raw(sessions.size(), std::nan("")), centered(sessions.size(), std::nan(""));
  std::vector<double> granger(sessions.size(), std::nan(""));
  stats::parallel_for(sessions.size(), [&](std::size_t s) {
    const auto& series = sessions[s];
    if (!varies(series.own)) return;  // constant play carries no lag information
    const bool use_opp = !series.opponent.empty() && varies(series.opponent);
    const auto fit = fit_lag_model(series.own, series.opponent, path.lag_order, use_opp, true);
    if (!fit.ok) return;
    raw[s] = fit.lag_coef;
    granger[s] = fit.granger_p;
    double bias = 0.0;
    if (path.bias_permutations > 0) {
      int used = 0;
      std::vector<double> perm(series.own.size());
      for (int b = 0; b < path.bias_permutations; ++b) {
        const auto idx = shuffled_indices(series.own.size(), derive_seed(opts.seed, kStreamPathBias, s, b));
        for (std::size_t i = 0; i < idx.size(); ++i) perm[i] = series.own[idx[i]];
        const auto pf = fit_lag_model(perm, series.opponent, path.lag_order, use_opp, false);
        if (pf.ok) {
          bias += pf.lag_coef;
          ++used;
        }
      }
      if (used > 0) bias /= used;
    }
    centered[s] = fit.lag_coef - bias;
  });

  std::vector<double> coefs, adjusted, granger_ps;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    if (std::isnan(raw[s])) continue;
    coefs.push_back(raw[s]);
    adjusted.push_back(centered[s]);
    granger_ps.push_back(granger[s]);
  }
  if (static_cast<int>(adjusted.size()) < path.min_sessions)
    throw Error("InsufficientSessions",
                fmt::format("only {} sessions with varying play (need {})", adjusted.size(), path.min_sessions));

  const auto t = stats::one_sample_t(adjusted);
  SignatureResult r;
  r.test = "path_dependence";
  r.n = static_cast<int>(adjusted.size());
  r.statistic = t.t;
  r.p_value = t.p;
  r.effect = stats::mean(coefs);
  r.flagged = t.p < opts.alpha;
  r.direction_observed = r.effect > 0 ? "positive" : "negative";
  r.details["mean_bias_corrected_coef"] = stats::mean(adjusted);
  r.details["sessions_used"] = static_cast<double>(adjusted.size());
  r.details["sessions_skipped"] = static_cast<double>(sessions.size() - adjusted.size());
  r.details["lag_order"] = path.lag_order;
  auto sorted = granger_ps;
  std::sort(sorted.begin(), sorted.end());
  r.details["granger_median_p"] = sorted[sorted.size() / 2];
  r.details["granger_reject_rate"] =
      static_cast<double>(std::count_if(sorted.begin(), sorted.end(), [&](double p) { return p < opts.alpha; })) /
      static_cast<double>(sorted.size());
  if (opts.power_replicates > 0)
    r.power_d05 = stats::mc_power_one_sample(r.n, 0.5, opts.alpha, opts.power_replicates,
                                             derive_seed(opts.seed, kStreamPathPower));
  return r;
}

// ---- paraphrase robustness -------------------------------------------------

SignatureResult test_paraphrase_robustness(const std::vector<std::vector<double>>& groups, const TestOptions& opts) {
  if (groups.size() < 5) throw Error("TooFewParaphrases", fmt::format("{} paraphrase groups < 5", groups.size()));
  std::vector<double> means;
  bool replicated = true;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("TooFewParaphrases", "empty paraphrase group");
    means.push_back(stats::mean(g));
    replicated = replicated && g.size() >= 2;
  }
  const double grand = stats::mean(means);
  if (std::fabs(grand) < 1e-6) throw Error("MeanNearZero", "mean of paraphrase means is ~0; CoV undefined");
  const double cov = stats::sample_sd(means) / std::fabs(grand);

  SignatureResult r;
  r.test = "paraphrase_robustness";
  r.n = static_cast<int>(groups.size());
  r.statistic = cov;
  r.effect = cov;
  r.flagged = cov < kParaphraseCovThreshold;
  r.direction_observed = r.flagged ? "stable" : "sensitive";
  r.details["mean_of_group_means"] = grand;
  if (replicated) {
    try {
      r.p_value = stats::one_way_anova(groups).p;
    } catch (const Error&) {
    }
  }
  (void)opts;
  return r;
}

// ---- LLM-shaped covariates -------------------------------------------------

std::vector<SignatureResult> test_llm_covariates(std::span<const double> deltas, std::span<const Condition> conditions,
                                                 const TestOptions& opts) {
  if (deltas.size() != conditions.size()) throw Error("InvalidInputs", "one condition per delta required");
  std::set<double> budgets;
  std::set<int> frames;
  for (const auto& c : conditions) {
    budgets.insert(c.compute_budget);
    frames.insert(static_cast<int>(c.framing));
  }
  if (budgets.size() < 3)
    throw Error("InsufficientLevels", fmt::format("{} compute-budget levels < 3", budgets.size()));
  if (frames.size() < 2) throw Error("InsufficientLevels", "framing does not vary");
  const std::size_t n = deltas.size();

  // (a) budget scaling: Kendall tau-b between |delta| and budget.
  std::vector<double> magnitude(n), budget(n);
  for (std::size_t i = 0; i < n; ++i) {
    magnitude[i] = std::fabs(deltas[i]);
    budget[i] = conditions[i].compute_budget;
  }
  SignatureResult scaling;
  scaling.test = "budget_scaling";
  scaling.n = static_cast<int>(n);
  try {
    const stats::KendallTauB kendall(magnitude, budget);
    const double s_obs = kendall.statistic(kendall.x_ranks());
    std::vector<char> extreme(static_cast<std::size_t>(std::max(opts.permutations, 0)), 0);
    stats::parallel_for(extreme.size(), [&](std::size_t b) {
      const auto idx = shuffled_indices(n, derive_seed(opts.seed, kStreamBudget, b));
      std::vector<int> ranks(n);
      for (std::size_t i = 0; i < n; ++i) ranks[i] = kendall.x_ranks()[idx[i]];
      extreme[b] = std::fabs(kendall.statistic(ranks)) >= std::fabs(s_obs) - 1e-9;
    });
    scaling.statistic = s_obs / kendall.denominator();
    scaling.effect = scaling.statistic;
    scaling.p_value = permutation_p(static_cast<std::size_t>(std::count(extreme.begin(), extreme.end(), 1)),
                                    opts.permutations);
  } catch (const Error& e) {
    if (e.name() != "ZeroVariance") throw;
    scaling.p_value = 1.0;  // constant |delta|: no scaling
  }
  scaling.flagged = *scaling.p_value < opts.alpha;
  scaling.direction_observed = scaling.statistic < 0 ? "decreasing" : (scaling.statistic > 0 ? "increasing" : "none");
  scaling.details["budget_levels"] = static_cast<double>(budgets.size());

  // (b) framing insensitivity: two-sample permutation test on mean delta.
  Framing fa = Framing::Gain, fb = Framing::Loss;
  if (!(frames.count(static_cast<int>(Framing::Gain)) && frames.count(static_cast<int>(Framing::Loss)))) {
    fa = static_cast<Framing>(*frames.begin());
    fb = static_cast<Framing>(*std::next(frames.begin()));
  }
  std::vector<double> pooled;
  std::size_t na = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (conditions[i].framing == fa) {
      pooled.push_back(deltas[i]);
      ++na;
    }
  for (std::size_t i = 0; i < n; ++i)
    if (conditions[i].framing == fb) pooled.push_back(deltas[i]);
  const std::size_t nb = pooled.size() - na;
  if (na < 2 || nb < 2) throw Error("InsufficientLevels", "each compared frame needs at least two deltas");
  const double total = std::accumulate(pooled.begin(), pooled.end(), 0.0);
  auto mean_diff = [&](auto&& value_at) {
    double sa = 0.0;
    for (std::size_t i = 0; i < na; ++i) sa += value_at(i);
    return sa / static_cast<double>(na) - (total - sa) / static_cast<double>(nb);
  };
  const double observed = mean_diff([&](std::size_t i) { return pooled[i]; });
  std::vector<char> extreme(static_cast<std::size_t>(std::max(opts.permutations, 0)), 0);
  stats::parallel_for(extreme.size(), [&](std::size_t b) {
    const auto idx = shuffled_indices(pooled.size(), derive_seed(opts.seed, kStreamFraming, b));
    extreme[b] = std::fabs(mean_diff([&](std::size_t i) { return pooled[idx[i]]; })) >= std::fabs(observed) * (1.0 - 1e-12);
  });
  SignatureResult framing;
  framing.test = "framing_insensitivity";
  framing.n = static_cast<int>(pooled.size());
  framing.statistic = observed;
  const double sd = pooled.size() > 1 ? stats::sample_sd(pooled) : 0.0;
  framing.effect = sd > 0 ? observed / sd : 0.0;
  framing.p_value =
      observed == 0.0 ? 1.0
                      : permutation_p(static_cast<std::size_t>(std::count(extreme.begin(), extreme.end(), 1)),
                                      opts.permutations);
  framing.flagged = *framing.p_value >= opts.alpha;
  framing.direction_observed = framing.flagged ? "insensitive" : "sensitive";
  framing.details["frame_a"] = static_cast<double>(fa);
  framing.details["frame_b"] = static_cast<double>(fb);
  if (opts.power_replicates > 0)
    framing.power_d05 = stats::mc_power_two_sample(static_cast<int>(na), static_cast<int>(nb), 0.5, opts.alpha,
                                                   opts.power_replicates, derive_seed(opts.seed, kStreamFramingPower));
  return {scaling, framing};
}

// ---- classification --------------------------------------------------------

Classification classify_flags(const SignatureFlags& f) {
  const int human = f.conditional_dependence + f.asymmetry + f.path_dependence + f.paraphrase_stable;
  if (human >= 3) return Classification::HumanShaped;
  if (f.llm_tests_present && !f.paraphrase_stable && (f.budget_scaling || f.framing_insensitive) &&
      !f.path_dependence)
    return Classification::LLMShaped;
  if (human == 0) return Classification::Unstructured;
  return Classification::Mixed;
}

SignatureProfile classify_profile(SignatureProfile p) {
  if (!p.conditional_dependence || !p.asymmetry || !p.path_dependence || !p.paraphrase)
    throw Error("IncompleteResults", "all four human-shaped signature results are required");
  SignatureFlags f;
  f.conditional_dependence = p.conditional_dependence->flagged;
  f.asymmetry = p.asymmetry->flagged;
  f.path_dependence = p.path_dependence->flagged;
  f.paraphrase_stable = p.paraphrase->flagged;
  for (const auto& r : p.llm_covariates) {
    if (r.test == "budget_scaling") {
      f.llm_tests_present = true;
      f.budget_scaling = r.flagged;
    } else if (r.test == "framing_insensitivity") {
      f.llm_tests_present = true;
      f.framing_insensitive = r.flagged;
    }
  }
  p.flags = f;
  p.classification = classify_flags(f);
  return p;
}

// ---- serialization ---------------------------------------------------------

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void to_json(nlohmann::json& j, const SignatureResult& r) {
  j = nlohmann::json{{"test", r.test},
                     {"statistic", finite_or_null(r.statistic)},
                     {"p_value", r.p_value ? finite_or_null(*r.p_value) : nlohmann::json(nullptr)},
                     {"effect", finite_or_null(r.effect)},
                     {"direction_predicted", r.direction_predicted ? nlohmann::json(*r.direction_predicted) : nlohmann::json(nullptr)},
                     {"direction_observed", r.direction_observed ? nlohmann::json(*r.direction_observed) : nlohmann::json(nullptr)},
                     {"flagged", r.flagged},
                     {"n", r.n}};
  j["ci95"] = r.ci95 ? nlohmann::json::array({finite_or_null(r.ci95->first), finite_or_null(r.ci95->second)})
                     : nlohmann::json(nullptr);
  j["power_d05"] = r.power_d05 ? finite_or_null(*r.power_d05) : nlohmann::json(nullptr);
  auto details = nlohmann::json::object();
  for (const auto& [k, v] : r.details) details[k] = finite_or_null(v);
  j["details"] = std::move(details);
}

void to_json(nlohmann::json& j, const SignatureProfile& p) {
  auto opt = [](const std::optional<SignatureResult>& r) { return r ? nlohmann::json(*r) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"schema_version", 1},
                     {"classification", to_string(p.classification)},
                     {"conditional_dependence", opt(p.conditional_dependence)},
                     {"distributional_asymmetry", opt(p.asymmetry)},
                     {"path_dependence", opt(p.path_dependence)},
                     {"paraphrase_robustness", opt(p.paraphrase)},
                     {"llm_covariates", p.llm_covariates}};
  j["flags"] = {{"conditional_dependence", p.flags.conditional_dependence},
                {"asymmetry", p.flags.asymmetry},
                {"path_dependence", p.flags.path_dependence},
                {"paraphrase_stable", p.flags.paraphrase_stable},
                {"llm_tests_present", p.flags.llm_tests_present},
                {"budget_scaling", p.flags.budget_scaling},
                {"framing_insensitive", p.flags.framing_insensitive}};
}

std::string profile_markdown(const SignatureProfile& p) {
  std::string md = fmt::format("**Classification:** {}\n\n", to_string(p.classification));
  md += "| test | statistic | p | effect | direction | flagged |\n|---|---|---|---|---|---|\n";
  auto row = [&](const SignatureResult& r) {
    const std::string pv = r.p_value ? fmt::format("{:.4f}", *r.p_value) : "n/a";
    std::string dir = r.direction_observed.value_or("");
    if (r.direction_predicted) dir += " (pred. " + *r.direction_predicted + ")";
    md += fmt::format("| {} | {:.4f} | {} | {:.4f} | {} | {} |\n", r.test, r.statistic, pv, r.effect, dir,
                      r.flagged ? "yes" : "no");
  };
  for (const auto* r : {&p.conditional_dependence, &p.asymmetry, &p.path_dependence, &p.paraphrase})
    if (*r) row(**r);
  for (const auto& r : p.llm_covariates) row(r);
  return md;
}

}  // namespace deltalab
