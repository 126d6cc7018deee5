#include "deltalab/moderator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"
#include "deltalab/stats.hpp"

namespace deltalab {

namespace {

struct Moments {
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.ss += (v - m.mean) * (v - m.mean);
  return m;
}

double pooled_d(std::span<const double> a, std::span<const double> b) {
  const auto ma = moments(a), mb = moments(b);
  const double df = static_cast<double>(a.size() + b.size() - 2);
  const double sp = std::sqrt((ma.ss + mb.ss) / df);
  return (ma.mean - mb.mean) / sp;
}

void check_groups(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error("TooFew", fmt::format("groups need n >= 2 (got {} and {})", a.size(), b.size()));
  const auto ma = moments(a), mb = moments(b);
  const double scale = std::max({1.0, std::fabs(ma.mean), std::fabs(mb.mean)});
  if (!(ma.ss + mb.ss > 1e-24 * scale * scale * static_cast<double>(a.size() + b.size())))
    throw Error("DegenerateVariance", "pooled variance is zero");
}

EffectSizeReport base_report(std::span<const double> a, std::span<const double> b) {
  EffectSizeReport r;
  r.n_named = static_cast<int>(a.size());
  r.n_aggregate = static_cast<int>(b.size());
  r.d = pooled_d(a, b);
  r.hedges_g = r.d * hedges_correction(r.n_named, r.n_aggregate);
  r.verdict = verdict_for(r.d);
  r.ci95 = {r.d, r.d};
  return r;
}

void finish_interval(EffectSizeReport& r, std::vector<double> reps) {
  std::erase_if(reps, [](double v) { return !std::isfinite(v); });
  if (!reps.empty()) r.ci95 = stats::percentile_interval(std::move(reps), 0.95);
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Supports: return "Supports";
    case Verdict::DirectionOnly: return "DirectionOnly";
    case Verdict::Null: return "Null";
    case Verdict::Reversed: return "Reversed";
  }
  return "Null";
}

Verdict verdict_for(double d) {
  if (d >= kModeratorThreshold) return Verdict::Supports;
  if (d > 1e-12) return Verdict::DirectionOnly;
  if (d < -1e-12) return Verdict::Reversed;
  return Verdict::Null;
}

double hedges_correction(int n1, int n2) { return 1.0 - 3.0 / (4.0 * (n1 + n2) - 9.0); }

EffectSizeReport cohens_d(std::span<const double> a, std::span<const double> b, const EffectOptions& opts) {
  check_groups(a, b);
  auto r = base_report(a, b);
  if (opts.bootstrap > 0) {
    std::vector<double> reps(static_cast<std::size_t>(opts.bootstrap));
    stats::parallel_for(reps.size(), [&](std::size_t k) {
      auto eng = make_engine(derive_seed(opts.seed, k));
      std::uniform_int_distribution<std::size_t> pa(0, a.size() - 1), pb(0, b.size() - 1);
      std::vector<double> ra(a.size()), rb(b.size());
      for (auto& v : ra) v = a[pa(eng)];
      for (auto& v : rb) v = b[pb(eng)];
      reps[k] = pooled_d(ra, rb);
    });
    finish_interval(r, std::move(reps));
  }
  return r;
}

EffectSizeReport cohens_d_paired(std::span<const double> a, std::span<const double> b, const EffectOptions& opts) {
  if (a.size() != b.size()) throw Error("InvalidInputs", "paired groups differ in size");
  check_groups(a, b);
  auto r = base_report(a, b);
  if (opts.bootstrap > 0) {
    std::vector<double> reps(static_cast<std::size_t>(opts.bootstrap));
    stats::parallel_for(reps.size(), [&](std::size_t k) {
      auto eng = make_engine(derive_seed(opts.seed, k));
      std::uniform_int_distribution<std::size_t> pick(0, a.size() - 1);
      std::vector<double> ra(a.size()), rb(b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const auto j = pick(eng);
        ra[i] = a[j];
        rb[i] = b[j];
      }
      reps[k] = pooled_d(ra, rb);
    });
    finish_interval(r, std::move(reps));
  }
  return r;
}

// ---- power -----------------------------------------------------------------

namespace {

void check_power_inputs(double d, double alpha, double power) {
  if (!(d > 0) || !std::isfinite(d)) throw Error("InvalidInputs", "d must be positive");
  if (!(alpha > 0 && alpha < 1)) throw Error("InvalidInputs", "alpha must lie in (0, 1)");
  if (!(power > 0 && power < 1)) throw Error("InvalidInputs", "power must lie in (0, 1)");
}

}  // namespace

int power_n_normal_approx(double d, double alpha, double power) {
  check_power_inputs(d, alpha, power);
  const double z = stats::normal_quantile(1.0 - alpha / 2.0) + stats::normal_quantile(power);
  return std::max(2, static_cast<int>(std::ceil(2.0 * z * z / (d * d))));
}

int power_n_per_arm(double d, double alpha, double power, const PowerOptions& opts) {
  const int start = power_n_normal_approx(d, alpha, power);
  if (opts.simulations <= 0) return start;
  for (int n = start;; ++n) {
    if (n > 10'000'000) throw Error("InvalidInputs", "required sample size is unreasonably large");
    if (stats::mc_power_two_sample(n, n, d, alpha, opts.simulations, derive_seed(opts.seed, static_cast<std::uint64_t>(n))) >=
        power - opts.tolerance)
      return n;
  }
}

double exact_power_two_sample(int n, double d, double alpha) {
  if (n < 2) return std::nan("");
  const double df = 2.0 * n - 2.0;
  const double crit = boost::math::quantile(boost::math::students_t(df), 1.0 - alpha / 2.0);
  const double ncp = d * std::sqrt(n / 2.0);
  const boost::math::non_central_t dist(df, ncp);
  return boost::math::cdf(boost::math::complement(dist, crit)) + boost::math::cdf(dist, -crit);
}

// ---- gradient test ---------------------------------------------------------

GradientReport individuation_gradient_test(const std::vector<ModeratorObservation>& obs, const GradientOptions& opts) {
  // game -> subject -> condition -> (sum, count)
  using Cell = std::pair<double, int>;
  std::map<std::string, std::map<std::string, std::map<Individuation, Cell>>> cells;
  for (const auto& o : obs) {
    auto& c = cells[o.game_id][o.subject_id][o.individuation];
    c.first += o.abs_delta;
    ++c.second;
  }
  for (const auto& [game, subjects] : cells) {
    bool named = false, aggregate = false;
    for (const auto& [s, conds] : subjects) {
      named = named || conds.count(Individuation::Named);
      aggregate = aggregate || conds.count(Individuation::Aggregate);
    }
    if (!named || !aggregate)
      throw Error("MissingCondition", fmt::format("game '{}' lacks the {} condition", game, named ? "Aggregate" : "Named"));
  }
  if (static_cast<int>(cells.size()) < opts.min_games)
    throw Error("FewerThanThreeGames", fmt::format("{} games < {}", cells.size(), opts.min_games));

  GradientReport report;
  double wsum = 0.0, wdsum = 0.0;
  std::uint64_t game_index = 0;
  for (const auto& [game, subjects] : cells) {
    std::vector<double> a, b, pa, pb;
    bool within = true;
    for (const auto& [s, conds] : subjects) {
      const auto n_it = conds.find(Individuation::Named), g_it = conds.find(Individuation::Aggregate);
      if (n_it != conds.end()) a.push_back(n_it->second.first / n_it->second.second);
      if (g_it != conds.end()) b.push_back(g_it->second.first / g_it->second.second);
      if (n_it != conds.end() && g_it != conds.end()) {
        pa.push_back(a.back());
        pb.push_back(b.back());
      } else {
        within = false;
      }
    }
    GameEffect ge;
    ge.game_id = game;
    ge.within_subject = within;
    const EffectOptions eo{opts.bootstrap, derive_seed(opts.seed, game_index++)};
    ge.effect = within ? cohens_d_paired(a, b, eo) : cohens_d(a, b, eo);
    if (within && pa.size() >= 2) {
      std::vector<double> diff(pa.size());
      for (std::size_t i = 0; i < pa.size(); ++i) diff[i] = pa[i] - pb[i];
      const double sd = stats::sample_sd(diff);
      if (sd > 0) {
        ge.paired_dz = stats::mean(diff) / sd;
        ge.paired_p_value = stats::one_sample_t(diff).p;
      }
    }
    const double n1 = ge.effect.n_named, n2 = ge.effect.n_aggregate;
    const double var = (n1 + n2) / (n1 * n2) + ge.effect.d * ge.effect.d / (2.0 * (n1 + n2));
    wsum += 1.0 / var;
    wdsum += ge.effect.d / var;
    report.games.push_back(std::move(ge));
  }
  report.pooled_d = wdsum / wsum;
  report.pooled_se = std::sqrt(1.0 / wsum);
  const bool all_positive =
      std::all_of(report.games.begin(), report.games.end(), [](const GameEffect& g) { return g.effect.d > 1e-12; });
  if (all_positive && report.pooled_d >= kModeratorThreshold)
    report.verdict = Verdict::Supports;
  else
    report.verdict = report.pooled_d >= kModeratorThreshold ? Verdict::DirectionOnly : verdict_for(report.pooled_d);

  if (!opts.ordering.empty()) {
    std::vector<double> rank, d;
    for (std::size_t i = 0; i < opts.ordering.size(); ++i) {
      const auto it = std::find_if(report.games.begin(), report.games.end(),
                                   [&](const GameEffect& g) { return g.game_id == opts.ordering[i]; });
      if (it == report.games.end()) throw Error("MissingCondition", "ordering names unknown game '" + opts.ordering[i] + "'");
      rank.push_back(static_cast<double>(i));
      d.push_back(it->effect.d);
    }
    if (d.size() >= 2) {
      try {
        report.trend_tau = stats::KendallTauB(d, rank).tau();
      } catch (const Error&) {
        report.trend_tau = 0.0;  // all d equal
      }
      report.trend_monotone = std::is_sorted(d.begin(), d.end());
    }
  }
  return report;
}

// ---- output ----------------------------------------------------------------

void to_json(nlohmann::json& j, const EffectSizeReport& r) {
  j = nlohmann::json{{"d", r.d},
                     {"hedges_g", r.hedges_g},
                     {"ci95", {r.ci95.first, r.ci95.second}},
                     {"n_named", r.n_named},
                     {"n_aggregate", r.n_aggregate},
                     {"verdict", to_string(r.verdict)}};
}

void to_json(nlohmann::json& j, const GradientReport& r) {
  auto games = nlohmann::json::array();
  for (const auto& g : r.games) {
    nlohmann::json e = g.effect;
    e["game_id"] = g.game_id;
    e["within_subject"] = g.within_subject;
    e["paired_dz"] = g.paired_dz ? nlohmann::json(*g.paired_dz) : nlohmann::json(nullptr);
    e["paired_p_value"] = g.paired_p_value ? nlohmann::json(*g.paired_p_value) : nlohmann::json(nullptr);
    games.push_back(std::move(e));
  }
  j = nlohmann::json{{"schema_version", 1},
                     {"games", std::move(games)},
                     {"pooled_d", r.pooled_d},
                     {"pooled_se", r.pooled_se},
                     {"verdict", to_string(r.verdict)},
                     {"trend_tau", r.trend_tau ? nlohmann::json(*r.trend_tau) : nlohmann::json(nullptr)},
                     {"trend_monotone", r.trend_monotone ? nlohmann::json(*r.trend_monotone) : nlohmann::json(nullptr)}};
}

std::string gradient_markdown(const GradientReport& r) {
  std::string md = "| game | d | hedges g | 95% CI | n named | n aggregate | verdict |\n|---|---|---|---|---|---|---|\n";
  for (const auto& g : r.games)
    md += fmt::format("| {} | {:.3f} | {:.3f} | [{:.3f}, {:.3f}] | {} | {} | {} |\n", g.game_id, g.effect.d,
                      g.effect.hedges_g, g.effect.ci95.first, g.effect.ci95.second, g.effect.n_named,
                      g.effect.n_aggregate, to_string(g.effect.verdict));
  md += fmt::format("\nPooled d = {:.3f} (se {:.3f}); overall verdict: **{}**\n", r.pooled_d, r.pooled_se,
                    to_string(r.verdict));
  if (r.trend_tau) md += fmt::format("Trend across ordering: tau = {:.3f}, monotone = {}\n", *r.trend_tau,
                                     r.trend_monotone.value_or(false) ? "yes" : "no");
  return md;
}

}  // namespace deltalab
