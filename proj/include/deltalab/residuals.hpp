#pragma once

// Behavioural residuals: observed play minus the classical prescription, on
// the unit action scale.

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "deltalab/baselines.hpp"
#include "deltalab/game_model.hpp"

namespace deltalab {

enum class Arm { Human, LLM, Synthetic };
std::string to_string(Arm a);
Arm arm_from_string(const std::string& s);

struct RoundRecord {
  std::string session_id;
  std::string subject_id;
  std::string game_id;
  int role = 0;
  int round = 1;
  Condition condition;
  Decision decision = 0.0;
  std::optional<Decision> opponent_decision;
  Arm arm = Arm::Synthetic;

  bool operator==(const RoundRecord&) const = default;
};

struct DeltaKey {
  std::string session_id;
  std::string subject_id;
  std::string game_id;
  int role = 0;
  Condition condition;
};

struct DeltaPoint {
  int index = 0;  // round number, or block number for discrete games
  double value = 0.0;
};

struct DeltaSeries {
  DeltaKey key;
  std::vector<DeltaPoint> values;
  int block_size = 0;  // 0: one value per round

  std::vector<double> raw() const;
};

/// delta = normalize(decision) - normalized baseline (point or mixed mean).
double compute_delta(const GameSpec& game, const RoundRecord& record, const std::optional<Baseline>& baseline);

/// Per-block cooperation rate minus the classical cooperation probability.
/// `records` are one subject's rounds in order; a trailing partial block is
/// dropped.
DeltaSeries block_delta_discrete(const GameSpec& game, std::span<const RoundRecord> records, const Baseline& baseline,
                                 int block_size);

enum class Pooling { PerGame, Global };

/// Divides every delta by the sample sd of its pool. Means are not removed.
std::vector<DeltaSeries> standardize_deltas(const std::vector<DeltaSeries>& series, Pooling pooling);

/// Tidy CSV: one row per delta value.
void write_delta_csv(std::ostream& out, const std::vector<DeltaSeries>& series);

}  // namespace deltalab
