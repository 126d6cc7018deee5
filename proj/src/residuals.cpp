#include "deltalab/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/stats.hpp"

namespace deltalab {

std::string to_string(Arm a) {
  switch (a) {
    case Arm::Human: return "Human";
    case Arm::LLM: return "LLM";
    case Arm::Synthetic: return "Synthetic";
  }
  return "Synthetic";
}

Arm arm_from_string(const std::string& s) {
  if (s == "Human" || s == "human") return Arm::Human;
  if (s == "LLM" || s == "llm") return Arm::LLM;
  if (s == "Synthetic" || s == "synthetic") return Arm::Synthetic;
  throw Error("InvalidParams", "unknown arm '" + s + "'");
}

std::vector<double> DeltaSeries::raw() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.value);
  return out;
}

double compute_delta(const GameSpec& game, const RoundRecord& record, const std::optional<Baseline>& baseline) {
  if (!baseline) throw Error("BaselineMissing", "no baseline for game '" + record.game_id + "'");
  if (baseline->role != record.role)
    throw Error("BaselineMissing", fmt::format("baseline is for role {}, record is role {}", baseline->role, record.role));
  return normalize_action(game, record.role, record.decision) - baseline->normalized_mean(game);
}

DeltaSeries block_delta_discrete(const GameSpec& game, std::span<const RoundRecord> records, const Baseline& baseline,
                                 int block_size) {
  if (block_size < 5) throw Error("BlockTooSmall", fmt::format("block size {} < 5", block_size));
  DeltaSeries out;
  out.block_size = block_size;
  if (records.empty()) return out;
  const auto& first = records.front();
  out.key = {first.session_id, first.subject_id, first.game_id, first.role, first.condition};
  if (game.is_continuous(first.role))
    throw Error("Unsupported", "block deltas apply to binary-action games");
  const double classical = baseline.normalized_mean(game);
  const std::size_t blocks = records.size() / static_cast<std::size_t>(block_size);
  for (std::size_t b = 0; b < blocks; ++b) {
    double coop = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(block_size); ++i)
      coop += normalize_action(game, first.role, records[b * static_cast<std::size_t>(block_size) + i].decision);
    out.values.push_back({static_cast<int>(b + 1), coop / block_size - classical});
  }
  return out;
}

std::vector<DeltaSeries> standardize_deltas(const std::vector<DeltaSeries>& series, Pooling pooling) {
  std::map<std::string, std::vector<double>> pools;
  auto pool_of = [&](const DeltaSeries& s) { return pooling == Pooling::Global ? std::string("*") : s.key.game_id; };
  for (const auto& s : series)
    for (const auto& v : s.values) pools[pool_of(s)].push_back(v.value);
  std::map<std::string, double> sd;
  for (const auto& [name, values] : pools) {
    if (values.size() < 2) throw Error("DegeneratePool", "pool '" + name + "' has fewer than two deltas");
    const double s = stats::sample_sd(values);
    double magnitude = 0.0;
    for (double v : values) magnitude = std::max(magnitude, std::fabs(v));
    // Rounding leaves a tiny sd for constant pools; treat it as zero.
    if (!(s > 1e-12 * std::max(magnitude, 1.0))) throw Error("DegeneratePool", "pool '" + name + "' has zero variance");
    sd[name] = s;
  }
  auto out = series;
  for (auto& s : out) {
    const double scale = sd.at(pool_of(s));
    for (auto& v : s.values) v.value /= scale;
  }
  return out;
}

void write_delta_csv(std::ostream& out, const std::vector<DeltaSeries>& series) {
  out << "session_id,subject_id,game_id,role,index,block_size,individuation,framing,paraphrase_id,stake_scale,"
         "compute_budget,context_length,delta\n";
  for (const auto& s : series) {
    const auto& c = s.key.condition;
    for (const auto& v : s.values)
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.key.session_id, s.key.subject_id, s.key.game_id,
                         s.key.role, v.index, s.block_size, to_string(c.individuation), to_string(c.framing),
                         c.paraphrase_id, c.stake_scale, c.compute_budget, c.context_length, v.value);
  }
}

}  // namespace deltalab
