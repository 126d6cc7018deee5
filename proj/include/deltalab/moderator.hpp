#pragma once

// Individuation moderator: |delta| under Named versus Aggregate opponents,
// effect sizes with bootstrap intervals, and sample-size planning.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltalab/game_model.hpp"

namespace deltalab {

inline constexpr double kModeratorThreshold = 0.5;

enum class Verdict { Supports, DirectionOnly, Null, Reversed };
std::string to_string(Verdict v);

/// Supports iff d >= 0.5, DirectionOnly iff 0 < d < 0.5, Reversed iff d < 0,
/// Null otherwise (|d| below 1e-12).
Verdict verdict_for(double d);

struct EffectSizeReport {
  double d = 0.0;         // Named minus Aggregate, pooled-sd units
  double hedges_g = 0.0;  // d (1 - 3 / (4 (n1 + n2) - 9))
  std::pair<double, double> ci95{0.0, 0.0};
  int n_named = 0;
  int n_aggregate = 0;
  Verdict verdict = Verdict::Null;
};

struct EffectOptions {
  int bootstrap = 5000;  // 0 leaves ci95 at (d, d)
  std::uint64_t seed = 0;
};

/// Cohen's d between two groups of |delta| values (group_a = Named).
/// Throws TooFew (n < 2 in a group) or DegenerateVariance.
EffectSizeReport cohens_d(std::span<const double> group_a, std::span<const double> group_b,
                          const EffectOptions& opts = {});

/// Same point estimate for matched pairs (a[i], b[i] from one subject); the
/// bootstrap resamples subjects so the interval reflects the pairing.
EffectSizeReport cohens_d_paired(std::span<const double> group_a, std::span<const double> group_b,
                                 const EffectOptions& opts = {});

double hedges_correction(int n1, int n2);

struct PowerOptions {
  int simulations = 10000;
  std::uint64_t seed = 0x5eed;
  double tolerance = 0.01;  // accept n when empirical power >= target - tolerance
};

/// Smallest n per arm for a two-sided two-sample t test: normal
/// approximation, then raised until Monte Carlo power reaches the target.
/// Never below 2. Throws InvalidInputs.
int power_n_per_arm(double d, double alpha, double power, const PowerOptions& opts = {});

/// Normal-approximation starting point 2 (z_{1-a/2} + z_power)^2 / d^2, rounded up.
int power_n_normal_approx(double d, double alpha, double power);

/// Exact power of the pooled two-sample t test via the noncentral t.
double exact_power_two_sample(int n_per_arm, double d, double alpha);

struct ModeratorObservation {
  std::string game_id;
  std::string subject_id;
  Individuation individuation = Individuation::Aggregate;
  double abs_delta = 0.0;
};

struct GradientOptions {
  int bootstrap = 5000;
  std::uint64_t seed = 0;
  int min_games = 3;
  /// Game ids from least to most individuated; enables the trend report.
  std::vector<std::string> ordering;
};

struct GameEffect {
  std::string game_id;
  EffectSizeReport effect;
  bool within_subject = false;
  std::optional<double> paired_dz;       // mean difference / sd of differences
  std::optional<double> paired_p_value;  // paired t test on the differences
};

struct GradientReport {
  std::vector<GameEffect> games;
  double pooled_d = 0.0;  // inverse-variance weighted
  double pooled_se = 0.0;
  Verdict verdict = Verdict::Null;
  std::optional<double> trend_tau;  // Kendall tau-b of d against the ordering
  std::optional<bool> trend_monotone;
};

/// Observations are first averaged per (game, subject, condition). Per-game d
/// uses subject-level means; when every subject appears in both conditions
/// the game is treated as within-subject. Verdict: Supports iff every game's
/// d > 0 and the pooled d >= 0.5; otherwise by the sign of the pooled d.
/// Throws MissingCondition or FewerThanThreeGames.
GradientReport individuation_gradient_test(const std::vector<ModeratorObservation>& observations,
                                           const GradientOptions& opts = {});

void to_json(nlohmann::json& j, const EffectSizeReport& r);
void to_json(nlohmann::json& j, const GradientReport& r);
std::string gradient_markdown(const GradientReport& r);

}  // namespace deltalab
