#include "deltalab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "deltalab/error.hpp"

namespace deltalab {

namespace {

using Belief = std::vector<std::pair<Decision, double>>;  // opponent action, weight

[[noreturn]] void unsupported(const GameSpec& g, const std::string& what) {
  throw Error("Unsupported", fmt::format("{} for {}", what, to_string(g.family)));
}

const ContinuousInterval& interval(const GameSpec& g, int role) {
  return std::get<ContinuousInterval>(g.action_space(role));
}

const DiscreteSet& labels(const GameSpec& g, int role) { return std::get<DiscreteSet>(g.action_space(role)); }

double midpoint(const GameSpec& g, int role) {
  const auto& c = interval(g, role);
  return 0.5 * (c.lo + c.hi);
}

int opponent_role(const GameSpec& g, int role) { return g.n_players == 2 ? 1 - role : role; }

Eigen::MatrixXd pd_matrix(const GameSpec& g) {
  // rows/cols: cooperate, defect; entry is the row player's payoff
  Eigen::MatrixXd a(2, 2);
  a << g.param("R"), g.param("S"), g.param("T"), g.param("P");
  return a;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> bimatrix(const GameSpec& g) {
  if (g.family == Family::PrisonersDilemma) {
    Eigen::MatrixXd a = pd_matrix(g);
    return {a, a.transpose()};
  }
  if (g.family == Family::GeneratedBimatrix) return {g.row_payoffs, g.col_payoffs};
  unsupported(g, "bimatrix form");
}

double tullock_share(double x, double others, double r, int n) {
  const double xr = std::pow(x, r);
  const double denom = xr + others;
  if (denom <= 0.0) return 1.0 / n;
  return xr / denom;
}

// Maximizes a one-dimensional payoff on [lo, hi]: dense grid, then golden
// section inside the best cell. Lowest argmax wins ties.
template <typename F>
double maximize_1d(F&& f, double lo, double hi) {
  constexpr int kGrid = 2001;
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double x = lo + (hi - lo) * i / (kGrid - 1);
    const double v = f(x);
    if (v > best_val + 1e-15) {
      best_val = v;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(best - 1, 0) / (kGrid - 1);
  double b = lo + (hi - lo) * std::min(best + 1, kGrid - 1) / (kGrid - 1);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, std::fabs(hi)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double refined = 0.5 * (a + b);
  const double grid_x = lo + (hi - lo) * best / (kGrid - 1);
  return f(refined) > best_val ? refined : grid_x;
}

// Best response of `role` to a belief over the opponents' (common) action.
Decision best_response(const GameSpec& g, int role, const Belief& belief) {
  switch (g.family) {
    case Family::PBeauty: {
      double m = 0.0;
      for (const auto& [a, w] : belief) m += w * std::get<double>(a);
      return g.param("p") * m;
    }
    case Family::TullockContest: {
      const double v = g.param("prize"), r = g.param("r");
      const int n = g.n_players;
      auto payoff = [&](double x) {
        double u = 0.0;
        for (const auto& [a, w] : belief) {
          const double others = (n - 1) * std::pow(std::get<double>(a), r);
          u += w * (v * tullock_share(x, others, r, n) - x);
        }
        return u;
      };
      return maximize_1d(payoff, 0.0, v);
    }
    case Family::PublicGoods: return 0.0;
    case Family::SecondPriceAuction: return g.param("value");
    case Family::Dictator:
      if (role == 0) return 0.0;
      unsupported(g, "best response of the passive recipient");
    case Family::Ultimatum: {
      if (role == 1) return 0.0;  // any positive offer beats rejection
      const double pot = g.param("pot"), unit = g.param("unit");
      double best_offer = unit;
      double best_val = -1.0;
      std::vector<double> candidates;
      for (const auto& [t, w] : belief)
        candidates.push_back(std::min(pot, std::max(unit, std::ceil(std::get<double>(t) / unit - 1e-12) * unit)));
      std::sort(candidates.begin(), candidates.end());
      for (double s : candidates) {
        double val = 0.0;
        for (const auto& [t, w] : belief)
          if (s >= std::get<double>(t) - 1e-12) val += w * (pot - s);
        if (val > best_val + 1e-12) {
          best_val = val;
          best_offer = s;
        }
      }
      return best_offer;
    }
    case Family::PrisonersDilemma:
    case Family::GeneratedBimatrix: {
      const auto [a, b] = bimatrix(g);
      const auto& own = labels(g, role);
      const auto& opp = labels(g, 1 - role);
      Eigen::VectorXd q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(opp.labels.size()));
      for (const auto& [act, w] : belief) {
        const auto& lbl = std::get<std::string>(act);
        const auto it = std::find(opp.labels.begin(), opp.labels.end(), lbl);
        q(it - opp.labels.begin()) += w;
      }
      const Eigen::VectorXd eu = role == 0 ? Eigen::VectorXd(a * q) : Eigen::VectorXd(b.transpose() * q);
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < eu.size(); ++i)
        if (eu(i) > eu(best) + 1e-12) best = i;
      return own.labels[static_cast<std::size_t>(best)];
    }
    case Family::Trust:
    case Family::FirstPriceAuction:
    case Family::AllPayAuction: unsupported(g, "best response");
  }
  unsupported(g, "best response");
}

Belief level0_belief(const GameSpec& g, int role, const Level0Rule& rule) {
  if (rule.action) {
    normalize_action(g, role, *rule.action);  // validates
    return {{*rule.action, 1.0}};
  }
  if (g.is_continuous(role)) return {{midpoint(g, role), 1.0}};
  Belief b;
  const auto& l = labels(g, role).labels;
  for (const auto& s : l) b.emplace_back(s, 1.0 / static_cast<double>(l.size()));
  return b;
}

Decision level0_decision(const GameSpec& g, int role, const Level0Rule& rule) {
  if (rule.action) return *rule.action;
  if (g.is_continuous(role)) return midpoint(g, role);
  // A naive player on a discrete set mixes uniformly; report the first label
  // as its representative pure action.
  return labels(g, role).labels.front();
}

Baseline make_discrete_pure(const GameSpec& g, int role, const std::string& label, Benchmark b) {
  const auto& l = labels(g, role).labels;
  std::vector<Decision> support(l.begin(), l.end());
  std::vector<double> w(l.size(), 0.0);
  w[static_cast<std::size_t>(std::find(l.begin(), l.end(), label) - l.begin())] = 1.0;
  return mixed_baseline(g, role, std::move(support), std::move(w), b);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& u, double lambda) {
  const Eigen::VectorXd z = lambda * u;
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp();
  return e / e.sum();
}

std::vector<Decision> grid(double lo, double hi, int points) {
  std::vector<Decision> out;
  out.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out.emplace_back(lo + (hi - lo) * i / (points - 1));
  return out;
}

}  // namespace

std::string Benchmark::tag() const {
  switch (kind) {
    case Kind::Nash: return "Nash";
    case Kind::SPE: return "SPE";
    case Kind::LevelK: return fmt::format("LevelK({})", k);
    case Kind::CognitiveHierarchy: return fmt::format("CognitiveHierarchy({})", tau);
    case Kind::LogitQRE: return fmt::format("LogitQRE({})", lambda);
  }
  return "Nash";
}

double Baseline::raw_mean() const {
  if (kind == BaselineKind::Point) return point;
  double m = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) m += weights[i] * std::get<double>(support[i]);
  return m;
}

double Baseline::normalized_mean(const GameSpec& game) const {
  if (kind == BaselineKind::Point) return normalize_action(game, role, point);
  double m = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (weights[i] != 0.0) m += weights[i] * normalize_action(game, role, support[i]);
  return m;
}

Baseline point_baseline(const GameSpec& game, int role, double value, Benchmark b) {
  normalize_action(game, role, value);  // throws OutOfRange for points outside the space
  Baseline out;
  out.game_id = game.id;
  out.role = role;
  out.kind = BaselineKind::Point;
  out.point = value;
  out.benchmark = b;
  return out;
}

Baseline mixed_baseline(const GameSpec& game, int role, std::vector<Decision> support, std::vector<double> weights,
                        Benchmark b) {
  if (support.size() != weights.size() || support.empty())
    throw Error("InvalidParams", "mixed baseline needs one weight per support action");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("InvalidParams", "negative mixed weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw Error("InvalidParams", fmt::format("weights sum to {}", total));
  Baseline out;
  out.game_id = game.id;
  out.role = role;
  out.kind = BaselineKind::Mixed;
  out.support = std::move(support);
  out.weights = std::move(weights);
  out.benchmark = b;
  return out;
}

Baseline closed_form_baseline(const GameSpec& g, int role, const ClosedFormOptions& opts) {
  g.action_space(role);
  const auto nash = Benchmark::nash();
  const auto spe = Benchmark::spe();
  switch (g.family) {
    case Family::Dictator:
      if (role == 0) return point_baseline(g, 0, 0.0, spe);
      unsupported(g, "closed form for the passive recipient");
    case Family::Ultimatum:
      return role == 0 ? point_baseline(g, 0, g.param("unit"), spe) : point_baseline(g, 1, 0.0, spe);
    case Family::Trust: return point_baseline(g, role, 0.0, spe);
    case Family::PrisonersDilemma: return make_discrete_pure(g, role, "defect", nash);
    case Family::PublicGoods: return point_baseline(g, role, 0.0, nash);
    case Family::PBeauty: return point_baseline(g, role, 0.0, nash);
    case Family::SecondPriceAuction: return point_baseline(g, role, g.param("value"), nash);
    case Family::FirstPriceAuction: {
      const double n = g.n_players, lo = g.param("value_lo");
      return point_baseline(g, role, lo + (g.param("value") - lo) * (n - 1) / n, nash);
    }
    case Family::AllPayAuction: {
      if (g.n_players != 2) unsupported(g, "closed form with more than two bidders");
      const int pts = std::max(opts.grid_points, 2);
      return mixed_baseline(g, role, grid(0.0, g.param("prize"), pts),
                            std::vector<double>(static_cast<std::size_t>(pts), 1.0 / pts), nash);
    }
    case Family::TullockContest: {
      const double r = g.param("r"), v = g.param("prize"), n = g.n_players;
      if (r > 1.0) unsupported(g, fmt::format("closed form with r = {} > 1", r));
      return point_baseline(g, role, r * v * (n - 1) / (n * n), nash);
    }
    case Family::GeneratedBimatrix: unsupported(g, "closed form (use support enumeration)");
  }
  unsupported(g, "closed form");
}

double max_deviation_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y) {
  const double row_value = x.dot(a * y);
  const double col_value = x.dot(b * y);
  const double row_best = (a * y).maxCoeff();
  const double col_best = (b.transpose() * x).maxCoeff();
  return std::max(row_best - row_value, col_best - col_value);
}

NashSolution solve_bimatrix_nash(const GameSpec& g) {
  if (g.family != Family::GeneratedBimatrix && g.family != Family::PrisonersDilemma)
    unsupported(g, "support enumeration");
  const auto [a, b] = bimatrix(g);
  const auto m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  if (m > 10 || n > 10) throw Error("InvalidParams", "support enumeration limited to 10x10");
  NashSolution out;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> found;

  // Solves  M[S,T] p = v 1, sum p = 1  for the mixing vector p over T.
  auto indifference = [](const Eigen::MatrixXd& payoff_on_support, Eigen::VectorXd& p) {
    const auto k = payoff_on_support.rows();
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(k + 1, k + 1);
    sys.topLeftCorner(k, k) = payoff_on_support;
    sys.topRightCorner(k, 1).setConstant(-1.0);
    sys.bottomLeftCorner(1, k).setConstant(1.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (!lu.isInvertible()) return false;
    p = lu.solve(rhs).head(k);
    return true;
  };

  auto describe = [](const std::vector<int>& s, const std::vector<int>& t) {
    std::string d = "rows{";
    for (std::size_t i = 0; i < s.size(); ++i) d += (i ? "," : "") + std::to_string(s[i]);
    d += "}|cols{";
    for (std::size_t i = 0; i < t.size(); ++i) d += (i ? "," : "") + std::to_string(t[i]);
    return d + "}";
  };

  for (int k = 1; k <= std::min(m, n); ++k) {
    std::vector<bool> row_mask(static_cast<std::size_t>(m), false);
    std::fill(row_mask.begin(), row_mask.begin() + k, true);
    do {
      std::vector<int> rows;
      for (int i = 0; i < m; ++i)
        if (row_mask[static_cast<std::size_t>(i)]) rows.push_back(i);
      std::vector<bool> col_mask(static_cast<std::size_t>(n), false);
      std::fill(col_mask.begin(), col_mask.begin() + k, true);
      do {
        std::vector<int> cols;
        for (int j = 0; j < n; ++j)
          if (col_mask[static_cast<std::size_t>(j)]) cols.push_back(j);
        Eigen::MatrixXd a_sub(k, k), bt_sub(k, k);
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            a_sub(i, j) = a(rows[i], cols[j]);
            bt_sub(j, i) = b(rows[i], cols[j]);
          }
        Eigen::VectorXd ys, xs;
        if (!indifference(a_sub, ys) || !indifference(bt_sub, xs)) {
          out.degenerate_supports.push_back(describe(rows, cols));
          continue;
        }
        if ((ys.array() < -1e-9).any() || (xs.array() < -1e-9).any()) continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(m), y = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < k; ++i) {
          x(rows[i]) = std::max(xs(i), 0.0);
          y(cols[i]) = std::max(ys(i), 0.0);
        }
        x /= x.sum();
        y /= y.sum();
        if (max_deviation_gain(a, b, x, y) > 1e-9) continue;
        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const auto& e) {
          return (e.first - x).template lpNorm<Eigen::Infinity>() < 1e-9 && (e.second - y).template lpNorm<Eigen::Infinity>() < 1e-9;
        });
        if (!duplicate) found.emplace_back(x, y);
      } while (std::prev_permutation(col_mask.begin(), col_mask.end()));
    } while (std::prev_permutation(row_mask.begin(), row_mask.end()));
  }
  if (found.empty()) throw Error("NoEquilibriumFound", "support enumeration found no equilibrium (internal inconsistency)");

  const auto& rl = labels(g, 0).labels;
  const auto& cl = labels(g, 1).labels;
  for (const auto& [x, y] : found) {
    std::vector<Decision> rs(rl.begin(), rl.end()), cs(cl.begin(), cl.end());
    std::vector<double> xw(x.data(), x.data() + x.size()), yw(y.data(), y.data() + y.size());
    out.equilibria.emplace_back(mixed_baseline(g, 0, std::move(rs), std::move(xw), Benchmark::nash()),
                                mixed_baseline(g, 1, std::move(cs), std::move(yw), Benchmark::nash()));
  }
  return out;
}

// ---- level-k / cognitive hierarchy ----------------------------------------

Decision level_k_action(const GameSpec& g, int role, int k, const Level0Rule& level0) {
  if (k < 0) throw Error("InvalidParams", "k must be >= 0");
  g.action_space(role);
  if (k == 0) return level0_decision(g, role, level0);
  // act[r] holds the level-h action of role r; level 0 is a belief (possibly mixed).
  std::vector<Belief> level(static_cast<std::size_t>(g.n_players));
  for (int r = 0; r < g.n_players; ++r)
    level[static_cast<std::size_t>(r)] = level0_belief(g, r, level0);
  Decision last;
  for (int h = 1; h <= k; ++h) {
    std::vector<Belief> next(level.size());
    const bool symmetric = g.n_players != 2;
    for (int r = 0; r < g.n_players; ++r) {
      if (symmetric && r > 0) {
        next[static_cast<std::size_t>(r)] = next[0];
        continue;
      }
      // Skip roles whose action is irrelevant to the requested one.
      if (g.family == Family::Dictator && r == 1) {
        next[1] = level[1];
        continue;
      }
      const auto action = best_response(g, r, level[static_cast<std::size_t>(opponent_role(g, r))]);
      next[static_cast<std::size_t>(r)] = {{action, 1.0}};
    }
    level = std::move(next);
  }
  return level[static_cast<std::size_t>(role)].front().first;
}

std::vector<double> truncated_poisson_weights(int k, double tau) {
  if (k < 1) throw Error("InvalidParams", "cognitive hierarchy needs k >= 1");
  if (!(tau > 0)) throw Error("InvalidParams", "tau must be > 0");
  std::vector<double> w(static_cast<std::size_t>(k));
  // log-space keeps tiny tau well conditioned
  for (int h = 0; h < k; ++h) w[static_cast<std::size_t>(h)] = h * std::log(tau) - std::lgamma(h + 1.0);
  const double m = *std::max_element(w.begin(), w.end());
  double total = 0.0;
  for (double& x : w) total += (x = std::exp(x - m));
  for (double& x : w) x /= total;
  return w;
}

Decision cognitive_hierarchy_action(const GameSpec& g, int role, int k, double tau, const Level0Rule& level0) {
  const auto weights_k = truncated_poisson_weights(k, tau);
  (void)weights_k;
  g.action_space(role);
  const auto players = static_cast<std::size_t>(g.n_players);
  // levels[h][r]: behaviour of a level-h player in role r
  std::vector<std::vector<Belief>> levels(1, std::vector<Belief>(players));
  for (std::size_t r = 0; r < players; ++r) levels[0][r] = level0_belief(g, static_cast<int>(r), level0);
  for (int h = 1; h <= k; ++h) {
    const auto w = truncated_poisson_weights(h, tau);
    std::vector<Belief> row(players);
    for (std::size_t r = 0; r < players; ++r) {
      if (g.family == Family::Dictator && r == 1) {
        row[1] = levels[0][1];
        continue;
      }
      const auto opp = static_cast<std::size_t>(opponent_role(g, static_cast<int>(r)));
      Belief belief;
      for (int l = 0; l < h; ++l)
        for (const auto& [a, p] : levels[static_cast<std::size_t>(l)][opp])
          belief.emplace_back(a, p * w[static_cast<std::size_t>(l)]);
      row[r] = {{best_response(g, static_cast<int>(r), belief), 1.0}};
    }
    levels.push_back(std::move(row));
  }
  return levels[static_cast<std::size_t>(k)][static_cast<std::size_t>(role)].front().first;
}

// ---- logit QRE -------------------------------------------------------------

NormalForm normal_form(const GameSpec& g, int grid_points) {
  if (grid_points < 2) throw Error("InvalidParams", "grid needs at least two points");
  NormalForm nf;
  const auto n = static_cast<Eigen::Index>(grid_points);
  switch (g.family) {
    case Family::PrisonersDilemma:
    case Family::GeneratedBimatrix: {
      auto [a, b] = bimatrix(g);
      const auto& rl = labels(g, 0).labels;
      const auto& cl = labels(g, 1).labels;
      nf.row_actions.assign(rl.begin(), rl.end());
      nf.col_actions.assign(cl.begin(), cl.end());
      nf.row_payoffs = std::move(a);
      nf.col_payoffs = std::move(b);
      return nf;
    }
    case Family::Dictator: {
      const double pot = g.param("pot");
      nf.row_actions = grid(0, pot, grid_points);
      nf.col_actions = {std::string("receive")};
      nf.row_payoffs.resize(n, 1);
      nf.col_payoffs.resize(n, 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double give = std::get<double>(nf.row_actions[static_cast<std::size_t>(i)]);
        nf.row_payoffs(i, 0) = pot - give;
        nf.col_payoffs(i, 0) = give;
      }
      return nf;
    }
    case Family::Ultimatum: {
      const double pot = g.param("pot");
      nf.row_actions = grid(0, pot, grid_points);
      nf.col_actions = grid(0, pot, grid_points);
      nf.row_payoffs.resize(n, n);
      nf.col_payoffs.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double s = std::get<double>(nf.row_actions[static_cast<std::size_t>(i)]);
          const double t = std::get<double>(nf.col_actions[static_cast<std::size_t>(j)]);
          const bool accepted = s >= t - 1e-12;
          nf.row_payoffs(i, j) = accepted ? pot - s : 0.0;
          nf.col_payoffs(i, j) = accepted ? s : 0.0;
        }
      return nf;
    }
    case Family::PublicGoods:
    case Family::TullockContest:
    case Family::AllPayAuction: {
      if (g.n_players != 2) unsupported(g, "QRE with more than two players");
      const auto& c = interval(g, 0);
      nf.row_actions = grid(c.lo, c.hi, grid_points);
      nf.col_actions = nf.row_actions;
      nf.row_payoffs.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double x = std::get<double>(nf.row_actions[static_cast<std::size_t>(i)]);
          const double y = std::get<double>(nf.col_actions[static_cast<std::size_t>(j)]);
          double u = 0.0;
          if (g.family == Family::PublicGoods) {
            u = g.param("endowment") - x + g.param("mpcr") * (x + y);
          } else if (g.family == Family::TullockContest) {
            const double r = g.param("r");
            u = g.param("prize") * tullock_share(x, std::pow(y, r), r, 2) - x;
          } else {
            const double v = g.param("prize");
            u = (x > y ? v : (x == y ? v / 2 : 0.0)) - x;
          }
          nf.row_payoffs(i, j) = u;
        }
      nf.col_payoffs = nf.row_payoffs.transpose();
      return nf;
    }
    case Family::Trust:
    case Family::PBeauty:
    case Family::FirstPriceAuction:
    case Family::SecondPriceAuction: unsupported(g, "logit QRE");
  }
  unsupported(g, "logit QRE");
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> logit_response(const NormalForm& nf, double lambda,
                                                           const Eigen::VectorXd& row, const Eigen::VectorXd& col) {
  return {softmax(nf.row_payoffs * col, lambda), softmax(nf.col_payoffs.transpose() * row, lambda)};
}

QreSolution logit_qre(const GameSpec& g, double lambda, const QreOptions& opts) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw Error("InvalidParams", "lambda must be >= 0");
  if (!(opts.damping > 0 && opts.damping <= 1)) throw Error("InvalidParams", "damping must lie in (0, 1]");
  const NormalForm nf = normal_form(g, opts.grid_points);
  Eigen::VectorXd row = Eigen::VectorXd::Constant(nf.row_payoffs.rows(), 1.0 / nf.row_payoffs.rows());
  Eigen::VectorXd col = Eigen::VectorXd::Constant(nf.row_payoffs.cols(), 1.0 / nf.row_payoffs.cols());
  QreSolution sol;

  // Damped fixed-point iteration from a warm start. The step shrinks when the
  // residual grows and recovers while it falls.
  auto solve_at = [&](double lam, double tol, int budget) {
    double damping = opts.damping;
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
      auto [r_next, c_next] = logit_response(nf, lam, row, col);
      const double residual =
          std::max((r_next - row).lpNorm<Eigen::Infinity>(), (c_next - col).lpNorm<Eigen::Infinity>());
      sol.iterations += 1;
      sol.residual = residual;
      if (residual < tol) return true;
      if (it >= budget) return false;
      damping = residual > previous ? std::max(damping * 0.5, 1e-4) : std::min(damping * 1.2, opts.damping);
      previous = residual;
      row = (1 - damping) * row + damping * r_next;
      col = (1 - damping) * col + damping * c_next;
    }
  };

  const Eigen::Index m = row.size(), n = col.size(), dim = m + n;
  const double scale = std::max({nf.row_payoffs.cwiseAbs().maxCoeff(), nf.col_payoffs.cwiseAbs().maxCoeff(), 1e-12});

  // H(z, lam) = z - S(z, lam) with z = (x, y); its Jacobian in z and the
  // derivative of S in lam.
  struct Local {
    Eigen::VectorXd h;
    Eigen::MatrixXd hz;
    Eigen::VectorXd s_lam;
  };
  auto local = [&](const Eigen::VectorXd& z, double lam) {
    const Eigen::VectorXd x = z.head(m), y = z.tail(n);
    const Eigen::VectorXd ux = nf.row_payoffs * y, uy = nf.col_payoffs.transpose() * x;
    const Eigen::VectorXd sx = softmax(ux, lam), sy = softmax(uy, lam);
    const Eigen::MatrixXd dx = Eigen::MatrixXd(sx.asDiagonal()) - sx * sx.transpose();
    const Eigen::MatrixXd dy = Eigen::MatrixXd(sy.asDiagonal()) - sy * sy.transpose();
    Local l;
    l.h.resize(dim);
    l.h << x - sx, y - sy;
    l.hz = Eigen::MatrixXd::Identity(dim, dim);
    l.hz.topRightCorner(m, n) = -lam * dx * nf.row_payoffs;
    l.hz.bottomLeftCorner(n, m) = -lam * dy * nf.col_payoffs.transpose();
    l.s_lam.resize(dim);
    l.s_lam << dx * ux, dy * uy;
    return l;
  };

  // Newton at fixed lambda from the current (row, col).
  auto newton_at = [&](double lam, double tol) {
    Eigen::VectorXd z(dim);
    z << row, col;
    for (int it = 0; it < 50; ++it) {
      const auto l = local(z, lam);
      sol.iterations += 1;
      sol.residual = l.h.lpNorm<Eigen::Infinity>();
      if (sol.residual < tol) {
        row = z.head(m);
        col = z.tail(n);
        return true;
      }
      const Eigen::VectorXd step = l.hz.fullPivLu().solve(-l.h);
      if (!step.allFinite()) return false;
      z += step;
    }
    return false;
  };

  if (lambda * scale > 1.0) {
    // Pseudo-arclength continuation of the principal branch in (z, nu) with
    // nu = mu / (1 + mu), mu = lambda * scale, from nu = 0 to the target. The
    // branch may fold back in lambda, which fixed-lambda stepping cannot
    // follow.
    const double target_nu = lambda * scale / (1.0 + lambda * scale);
    auto lam_of = [&](double nu) { return nu / (1.0 - nu) / scale; };
    auto dlam_dnu = [&](double nu) { return 1.0 / ((1.0 - nu) * (1.0 - nu)) / scale; };
    auto full_jac = [&](const Eigen::VectorXd& w, Local& l) {
      l = local(w.head(dim), lam_of(w(dim)));
      Eigen::MatrixXd j(dim, dim + 1);
      j.leftCols(dim) = l.hz;
      j.col(dim) = -l.s_lam * dlam_dnu(w(dim));
      return j;
    };
    Eigen::VectorXd w(dim + 1);
    w << row, col, 0.0;
    Eigen::VectorXd tangent = Eigen::VectorXd::Zero(dim + 1);
    tangent(dim) = 1.0;
    double h = 0.05;
    bool reached = false;
    for (int step = 0; step < 20000 && !reached; ++step) {
      Local l;
      const Eigen::MatrixXd j = full_jac(w, l);
      Eigen::MatrixXd aug(dim + 1, dim + 1);
      aug.topRows(dim) = j;
      aug.row(dim) = tangent.transpose();
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim + 1);
      e(dim) = 1.0;
      Eigen::VectorXd t = aug.fullPivLu().solve(e);
      t.normalize();
      if (t.dot(tangent) < 0) t = -t;
      tangent = t;

      bool accepted = false;
      while (!accepted && h > 1e-12) {
        const Eigen::VectorXd predicted = w + h * tangent;
        Eigen::VectorXd v = predicted;
        bool ok = v(dim) < 1.0;
        for (int it = 0; ok && it < 12; ++it) {
          Local lv;
          Eigen::MatrixXd jv = full_jac(v, lv);
          Eigen::MatrixXd a(dim + 1, dim + 1);
          a.topRows(dim) = jv;
          a.row(dim) = tangent.transpose();
          Eigen::VectorXd rhs(dim + 1);
          rhs << -lv.h, -(tangent.dot(v - w) - h);
          const Eigen::VectorXd dv = a.fullPivLu().solve(rhs);
          if (!dv.allFinite()) {
            ok = false;
            break;
          }
          v += dv;
          if (!(v(dim) >= 0.0 && v(dim) < 1.0)) ok = false;
          if (ok && dv.lpNorm<Eigen::Infinity>() < 1e-10) break;
        }
        // A corrector that lands far from the prediction has likely jumped
        // across a fold onto another part of the branch.
        if (ok) ok = (v - predicted).norm() < 0.5 * h;
        if (ok) ok = local(v.head(dim), lam_of(v(dim))).h.lpNorm<Eigen::Infinity>() < 1e-9;
        if (!ok) {
          h *= 0.5;
          continue;
        }
        accepted = true;
        sol.iterations += 1;
        if (v(dim) >= target_nu) {
          // Crossed the target: interpolate and correct at fixed lambda.
          const double frac = (target_nu - w(dim)) / (v(dim) - w(dim));
          const Eigen::VectorXd z = w.head(dim) + frac * (v.head(dim) - w.head(dim));
          row = z.head(m);
          col = z.tail(n);
          if (newton_at(lambda, opts.tolerance)) {
            reached = true;
          } else {
            h *= 0.25;  // retry closer to the target from w
            row = w.head(m);
            col = w.segment(m, n);
            accepted = false;
            if (h < 1e-12) break;
          }
        } else {
          w = v;
          h = std::min(h * 1.5, 0.1);
        }
      }
      if (!accepted) break;
    }
    if (!reached) {
      row = w.head(m);
      col = w.segment(m, n);
    }
    if (reached || solve_at(lambda, opts.tolerance, opts.max_iterations)) {
      row = row.cwiseMax(0.0);
      col = col.cwiseMax(0.0);
    } else {
      throw Error("NoConvergence", fmt::format("residual {} after {} iterations", sol.residual, sol.iterations));
    }
  } else if (!solve_at(lambda, opts.tolerance, opts.max_iterations)) {
    throw Error("NoConvergence", fmt::format("residual {} after {} iterations", sol.residual, sol.iterations));
  }
  const auto bm = Benchmark::logit_qre(lambda);
  auto to_weights = [](const Eigen::VectorXd& v) {
    std::vector<double> w(v.data(), v.data() + v.size());
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= s;
    return w;
  };
  sol.roles.push_back(mixed_baseline(g, 0, nf.row_actions, to_weights(row), bm));
  if (g.family != Family::Dictator) sol.roles.push_back(mixed_baseline(g, 1, nf.col_actions, to_weights(col), bm));
  return sol;
}

// ---- behavioural closed forms ---------------------------------------------

double fairness_rejection_threshold(double pot, double alpha) {
  if (!(pot > 0) || !(alpha >= 0)) throw Error("InvalidParams", "need P > 0 and alpha >= 0");
  if (std::isinf(alpha)) return pot / 2.0;
  return alpha * pot / (1.0 + 2.0 * alpha);
}

double literal_fairness_utility(double offer, double pot, double alpha) {
  return offer + alpha * (pot / 2.0 - offer);
}

double risk_averse_bid(double value, int n, double rho) {
  if (!(rho > 0 && rho <= 1)) throw Error("InvalidRho", fmt::format("rho = {} outside (0, 1]", rho));
  if (n < 2) throw Error("InvalidParams", "n >= 2 bidders required");
  if (value < 0) throw Error("InvalidParams", "value must be >= 0");
  return value * (n - 1) / (n - 1 + rho);
}

Baseline compute_baseline(const GameSpec& g, int role, const Benchmark& bm, const QreOptions& qre) {
  switch (bm.kind) {
    case Benchmark::Kind::Nash:
    case Benchmark::Kind::SPE: {
      if (g.family == Family::GeneratedBimatrix) {
        auto sol = solve_bimatrix_nash(g);
        return role == 0 ? sol.equilibria.front().first : sol.equilibria.front().second;
      }
      return closed_form_baseline(g, role, {qre.grid_points});
    }
    case Benchmark::Kind::LevelK:
    case Benchmark::Kind::CognitiveHierarchy: {
      const Decision d = bm.kind == Benchmark::Kind::LevelK ? level_k_action(g, role, bm.k)
                                                            : cognitive_hierarchy_action(g, role, bm.k, bm.tau);
      if (const auto* x = std::get_if<double>(&d)) return point_baseline(g, role, *x, bm);
      return make_discrete_pure(g, role, std::get<std::string>(d), bm);
    }
    case Benchmark::Kind::LogitQRE: {
      auto sol = logit_qre(g, bm.lambda, qre);
      if (role >= static_cast<int>(sol.roles.size())) unsupported(g, "QRE for this role");
      return sol.roles[static_cast<std::size_t>(role)];
    }
  }
  unsupported(g, "benchmark");
}

void to_json(nlohmann::json& j, const Baseline& b) {
  j = nlohmann::json{{"game_id", b.game_id},
                     {"role", b.role},
                     {"kind", b.kind == BaselineKind::Point ? "Point" : "Mixed"},
                     {"benchmark", b.benchmark.tag()}};
  if (b.kind == BaselineKind::Point) {
    j["point"] = b.point;
  } else {
    auto support = nlohmann::json::array();
    for (const auto& s : b.support) {
      if (const auto* x = std::get_if<double>(&s))
        support.push_back(*x);
      else
        support.push_back(std::get<std::string>(s));
    }
    j["support"] = std::move(support);
    j["weights"] = b.weights;
  }
}

}  // namespace deltalab
