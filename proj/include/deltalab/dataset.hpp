#pragma once

// Round-level datasets: the CSV schema, game registries and the lossless
// write/read round trip.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "deltalab/game_model.hpp"
#include "deltalab/residuals.hpp"

namespace deltalab {

inline constexpr int kDatasetSchemaVersion = 1;

struct Dataset {
  int schema_version = kDatasetSchemaVersion;
  std::string generator;
  std::optional<std::uint64_t> master_seed;
  std::vector<RoundRecord> rows;
  std::map<std::string, GameSpec> games;  // every game referenced by rows
  int dropped_rows = 0;                   // lenient loads only
};

/// Games keyed by id. The bundled registry lives in data/games.json; a
/// dataset may carry additional games in a "<csv>.games.json" sidecar.
using GameRegistry = std::map<std::string, GameSpec>;

GameRegistry load_game_registry(const std::filesystem::path& path);
GameRegistry bundled_games();
void write_game_registry(const std::filesystem::path& path, const GameRegistry& games);

struct LoadOptions {
  bool lenient = false;  // drop bad rows (counted) instead of failing
  GameRegistry extra_games;
};

/// Required columns, in the order written.
const std::vector<std::string>& dataset_columns();

/// Parses CSV text. Throws MissingColumn, TypeError (line, column) or
/// UnknownGame; in lenient mode row-level failures are dropped and counted.
Dataset parse_dataset(const std::string& csv_text, const GameRegistry& games, bool lenient = false);

/// Reads the CSV plus its sidecar registry (if present) and the bundled games.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts = {});

void write_dataset_csv(std::ostream& out, const Dataset& d);

/// Writes the CSV and, when the dataset carries games, the sidecar registry.
void write_dataset(const std::filesystem::path& path, const Dataset& d);

std::filesystem::path sidecar_path(const std::filesystem::path& csv);

/// FNV-1a hash of the serialized CSV; used to check replay stability.
std::string dataset_hash(const Dataset& d);

}  // namespace deltalab
