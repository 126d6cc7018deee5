#pragma once

// Published LLM-versus-human contrasts bundled as a fixture.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace deltalab {

struct EvidenceRow {
  std::string study;
  std::string family;
  std::string statistic;
  std::optional<double> llm_value;  // empty when the magnitude is not extractable
  std::optional<double> human_value;
  bool is_rate = true;
  std::string direction;
  std::string source_note;
};

struct EvidenceContrast {
  EvidenceRow row;
  std::optional<double> diff;  // llm - human, computed in basis points
  int sign = 0;                // +1, 0, -1 (0 also when not extractable)
};

/// Throws ParseError on malformed JSON, negative values or rates above 1.
std::vector<EvidenceRow> parse_evidence(const nlohmann::json& j);
std::vector<EvidenceRow> load_evidence(const std::filesystem::path& path);
std::filesystem::path bundled_evidence_path();

std::vector<EvidenceContrast> evidence_summary(const std::vector<EvidenceRow>& rows);
EvidenceContrast evidence_contrast(const EvidenceRow& row);

void to_json(nlohmann::json& j, const EvidenceContrast& c);
std::string evidence_markdown(const std::vector<EvidenceContrast>& contrasts);

}  // namespace deltalab
