#pragma once

// Dataset -> residuals -> signature battery / moderator input.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltalab/baselines.hpp"
#include "deltalab/dataset.hpp"
#include "deltalab/moderator.hpp"
#include "deltalab/residuals.hpp"
#include "deltalab/signatures.hpp"

namespace deltalab {

struct AnalysisOptions {
  TestOptions tests;
  PathOptions path;
  Benchmark benchmark = Benchmark::nash();
  int block_size = 5;                 // binary-action games use per-block cooperation rates
  std::vector<int> roles;             // empty: every role with a unit action scale
  Direction neutral_direction = Direction::Left;  // predicted skew when no Gain/Loss frames exist
  bool llm_covariates = true;         // run when budget and framing vary enough
  int moderator_role = 0;
  GradientOptions gradient;
};

struct DeltaObservation {
  DeltaKey key;
  Family family = Family::Dictator;
  int index = 0;       // round, or block number
  double delta = 0.0;  // unit scale
};

/// One residual per round for continuous roles, one per block of
/// `block_size` rounds for binary roles (per subject, in round order).
std::vector<DeltaObservation> dataset_deltas(const Dataset& data, const AnalysisOptions& opts);

/// Own and opponent decision series per (session, subject, role).
std::vector<PathSeries> dataset_path_series(const Dataset& data, const AnalysisOptions& opts);

/// Runs the four human-shaped tests (plus LLM covariates when applicable)
/// and classifies the profile.
SignatureProfile analyze_dataset(const Dataset& data, const AnalysisOptions& opts);

std::vector<ModeratorObservation> moderator_observations(const Dataset& data, const AnalysisOptions& opts);
GradientReport moderator_report(const Dataset& data, const AnalysisOptions& opts);

void write_delta_observations_csv(std::ostream& out, const std::vector<DeltaObservation>& obs);

AnalysisOptions analysis_options_from_json(const nlohmann::json& j, AnalysisOptions base = {});
nlohmann::json analysis_options_json(const AnalysisOptions& o);

}  // namespace deltalab
