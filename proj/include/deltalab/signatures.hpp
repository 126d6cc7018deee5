#pragma once

// Operational signatures of structured residuals and the profile classifier.
//
// Human-shaped tests: conditional dependence, distributional asymmetry,
// path dependence and paraphrase stability. LLM-shaped covariates: budget
// scaling and framing insensitivity.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltalab/game_model.hpp"

namespace deltalab {

inline constexpr double kSignatureAlpha = 0.05;
inline constexpr double kSkewThreshold = 0.5;
inline constexpr double kParaphraseCovThreshold = 0.2;

enum class Direction { Left, Right };
std::string to_string(Direction d);
std::optional<Direction> predicted_direction(Framing f);  // Gain -> Left, Loss -> Right

struct SignatureResult {
  std::string test;
  double statistic = 0.0;
  std::optional<double> p_value;
  double effect = 0.0;
  std::optional<std::string> direction_predicted;
  std::optional<std::string> direction_observed;
  bool flagged = false;
  int n = 0;
  std::optional<std::pair<double, double>> ci95;
  std::optional<double> power_d05;  // Monte Carlo power against d = 0.5
  std::map<std::string, double> details;
};

struct TestOptions {
  int permutations = 10000;
  int bootstrap = 5000;
  int power_replicates = 1000;  // 0 disables the power report
  std::uint64_t seed = 0;
  double alpha = kSignatureAlpha;
};

struct Feature {
  std::string name;
  std::vector<double> numeric;      // used when levels is empty
  std::vector<std::string> levels;  // categorical; one-hot encoded against the first sorted level
  bool categorical() const { return !levels.empty(); }
};

SignatureResult test_conditional_dependence(std::span<const double> deltas, const std::vector<Feature>& features,
                                            const TestOptions& opts = {});

SignatureResult test_distributional_asymmetry(std::span<const double> deltas, Direction predicted,
                                              const TestOptions& opts = {});

struct PathSeries {
  std::string id;
  std::vector<double> own;       // normalized decisions by round
  std::vector<double> opponent;  // lagged control; may be empty
};

struct PathOptions {
  int lag_order = 1;
  int min_rounds = 10;
  int min_sessions = 5;
  // Within-series permutations used to remove the small-sample bias of the
  // OLS lag coefficient before aggregation; 0 disables the correction.
  int bias_permutations = 200;
};

SignatureResult test_path_dependence(const std::vector<PathSeries>& sessions, const PathOptions& path = {},
                                     const TestOptions& opts = {});

/// Groups of deltas keyed by paraphrase id (each group needs >= 1 value).
SignatureResult test_paraphrase_robustness(const std::vector<std::vector<double>>& deltas_by_paraphrase,
                                           const TestOptions& opts = {});

/// Returns {budget_scaling, framing_insensitivity}.
std::vector<SignatureResult> test_llm_covariates(std::span<const double> deltas,
                                                 std::span<const Condition> conditions,
                                                 const TestOptions& opts = {});

enum class Classification { HumanShaped, LLMShaped, Unstructured, Mixed };
std::string to_string(Classification c);

struct SignatureFlags {
  bool conditional_dependence = false;
  bool asymmetry = false;
  bool path_dependence = false;
  bool paraphrase_stable = false;
  bool llm_tests_present = false;
  bool budget_scaling = false;
  bool framing_insensitive = false;
};

/// Decision rule, applied in order: HumanShaped (>= 3 of the four human
/// flags), LLMShaped (paraphrase-sensitive, budget scaling or framing
/// insensitivity, no path dependence; needs the LLM tests), Unstructured (no
/// human flag), otherwise Mixed.
Classification classify_flags(const SignatureFlags& f);

struct SignatureProfile {
  std::optional<SignatureResult> conditional_dependence;
  std::optional<SignatureResult> asymmetry;
  std::optional<SignatureResult> path_dependence;
  std::optional<SignatureResult> paraphrase;
  std::vector<SignatureResult> llm_covariates;  // empty or {budget, framing}
  Classification classification = Classification::Unstructured;
  SignatureFlags flags;
};

/// Throws Error("IncompleteResults") unless all four human-shaped results are set.
SignatureProfile classify_profile(SignatureProfile results);

void to_json(nlohmann::json& j, const SignatureResult& r);
void to_json(nlohmann::json& j, const SignatureProfile& p);
std::string profile_markdown(const SignatureProfile& p);

}  // namespace deltalab
