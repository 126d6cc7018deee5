#pragma once

// Classical prescriptions for a role in a game: closed forms, level-k and
// cognitive-hierarchy recursion, logit QRE and bimatrix support enumeration.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "deltalab/game_model.hpp"

namespace deltalab {

enum class BaselineKind { Point, Mixed };

struct Benchmark {
  enum class Kind { Nash, SPE, LevelK, CognitiveHierarchy, LogitQRE };
  Kind kind = Kind::Nash;
  int k = 0;
  double tau = 1.5;
  double lambda = 0.0;

  std::string tag() const;  // "Nash", "LevelK(2)", "CognitiveHierarchy(1.5)", ...
  static Benchmark nash() { return {}; }
  static Benchmark spe() { return {Kind::SPE}; }
  static Benchmark level_k(int k) { return {Kind::LevelK, k}; }
  static Benchmark cognitive_hierarchy(int k, double tau) { return {Kind::CognitiveHierarchy, k, tau}; }
  static Benchmark logit_qre(double lambda) { return {Kind::LogitQRE, 0, 0.0, lambda}; }
};

struct Baseline {
  std::string game_id;
  int role = 0;
  BaselineKind kind = BaselineKind::Point;
  double point = 0.0;             // raw units, Point kind on continuous spaces
  std::vector<Decision> support;  // Mixed kind (or a pure discrete action)
  std::vector<double> weights;
  Benchmark benchmark;

  /// Position of the prescription on the unit scale: the point itself or
  /// the mixed-strategy mean.
  double normalized_mean(const GameSpec& game) const;
  double raw_mean() const;  // continuous supports only
};

Baseline point_baseline(const GameSpec& game, int role, double value, Benchmark b);
Baseline mixed_baseline(const GameSpec& game, int role, std::vector<Decision> support, std::vector<double> weights,
                        Benchmark b);

struct ClosedFormOptions {
  int grid_points = 101;  // discretization for mixed closed forms (all-pay)
};

Baseline closed_form_baseline(const GameSpec& game, int role, const ClosedFormOptions& opts = {});

struct NashSolution {
  std::vector<std::pair<Baseline, Baseline>> equilibria;
  std::vector<std::string> degenerate_supports;  // singular indifference systems, reported not fatal
};

NashSolution solve_bimatrix_nash(const GameSpec& game);

/// Largest gain either player obtains from a unilateral deviation to a pure
/// strategy, given a mixed profile (x for rows, y for columns).
double max_deviation_gain(const Eigen::MatrixXd& row_payoffs, const Eigen::MatrixXd& col_payoffs,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct Level0Rule {
  std::optional<Decision> action;  // empty: uniform midpoint / uniform mix
};

Decision level_k_action(const GameSpec& game, int role, int k, const Level0Rule& level0 = {});
Decision cognitive_hierarchy_action(const GameSpec& game, int role, int k, double tau = 1.5,
                                    const Level0Rule& level0 = {});

/// Truncated Poisson(tau) weights over levels 0..k-1.
std::vector<double> truncated_poisson_weights(int k, double tau);

struct QreOptions {
  int grid_points = 101;
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

struct QreSolution {
  std::vector<Baseline> roles;
  int iterations = 0;
  double residual = 0.0;
};

/// Two-player normal form used by the QRE solver; continuous spaces are
/// discretized to opts.grid_points evenly spaced actions.
struct NormalForm {
  std::vector<Decision> row_actions;
  std::vector<Decision> col_actions;
  Eigen::MatrixXd row_payoffs;
  Eigen::MatrixXd col_payoffs;
};

NormalForm normal_form(const GameSpec& game, int grid_points = 101);

/// One application of the logit response map to a profile.
std::pair<Eigen::VectorXd, Eigen::VectorXd> logit_response(const NormalForm& nf, double lambda,
                                                           const Eigen::VectorXd& row, const Eigen::VectorXd& col);

QreSolution logit_qre(const GameSpec& game, double lambda, const QreOptions& opts = {});

/// Offer below which a disadvantageous-inequality-averse responder rejects:
/// s* = alpha P / (1 + 2 alpha).
double fairness_rejection_threshold(double pot, double alpha);

/// Responder utility in the schematic form pi + alpha (fair_share - own_share),
/// kept for comparison; the rejection threshold above does not use it.
double literal_fairness_utility(double offer, double pot, double alpha);

/// First-price bid with CRRA utility x^rho and uniform values: v(n-1)/(n-1+rho).
double risk_averse_bid(double value, int n, double rho);

/// Dispatches to the solver matching the benchmark. QRE returns the role's
/// mixed strategy; Nash uses closed forms (canonical games) or the first
/// equilibrium found by support enumeration (generated games).
Baseline compute_baseline(const GameSpec& game, int role, const Benchmark& benchmark,
                          const QreOptions& qre = {});

void to_json(nlohmann::json& j, const Baseline& b);

}  // namespace deltalab
