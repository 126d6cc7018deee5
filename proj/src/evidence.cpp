#include "deltalab/evidence.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "deltalab/error.hpp"

namespace deltalab {

std::vector<EvidenceRow> parse_evidence(const nlohmann::json& j) {
  std::vector<EvidenceRow> rows;
  try {
    for (const auto& r : j.at("rows")) {
      EvidenceRow row;
      row.study = r.at("study").get<std::string>();
      row.family = r.at("family").get<std::string>();
      row.statistic = r.at("statistic").get<std::string>();
      row.is_rate = r.value("is_rate", true);
      row.direction = r.value("direction", "");
      row.source_note = r.value("source_note", "");
      for (auto [key, slot] : {std::pair{"llm_value", &row.llm_value}, std::pair{"human_value", &row.human_value}}) {
        if (!r.contains(key) || r.at(key).is_null()) continue;
        const double v = r.at(key).get<double>();
        if (!std::isfinite(v) || v < 0)
          throw Error("ParseError", fmt::format("{}: {} = {} must be nonnegative", row.study, key, v));
        if (row.is_rate && v > 1)
          throw Error("ParseError", fmt::format("{}: {} = {} is a rate above 1", row.study, key, v));
        *slot = v;
      }
      rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("evidence fixture: ") + e.what());
  }
  return rows;
}

std::vector<EvidenceRow> load_evidence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("ParseError", "cannot read " + path.string());
  try {
    return parse_evidence(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("ParseError", path.string() + ": " + e.what());
  }
}

std::filesystem::path bundled_evidence_path() {
  return std::filesystem::path(DELTALAB_DATA_DIR) / "evidence_table.json";
}

EvidenceContrast evidence_contrast(const EvidenceRow& row) {
  EvidenceContrast c{row, std::nullopt, 0};
  if (row.llm_value && row.human_value) {
    // Integer basis points keep reported two-decimal contrasts exact.
    const auto llm = std::llround(*row.llm_value * 10000.0);
    const auto human = std::llround(*row.human_value * 10000.0);
    c.diff = static_cast<double>(llm - human) / 10000.0;
    c.sign = (llm > human) - (llm < human);
  }
  return c;
}

std::vector<EvidenceContrast> evidence_summary(const std::vector<EvidenceRow>& rows) {
  std::vector<EvidenceContrast> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(evidence_contrast(r));
  return out;
}

void to_json(nlohmann::json& j, const EvidenceContrast& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j = nlohmann::json{{"study", c.row.study},         {"family", c.row.family},
                     {"statistic", c.row.statistic}, {"llm_value", opt(c.row.llm_value)},
                     {"human_value", opt(c.row.human_value)}, {"diff", opt(c.diff)},
                     {"sign", c.sign},               {"direction", c.row.direction},
                     {"source_note", c.row.source_note}};
}

std::string evidence_markdown(const std::vector<EvidenceContrast>& contrasts) {
  std::string md = "| study | game | statistic | LLM | human | diff |\n|---|---|---|---|---|---|\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("n/a"); };
  for (const auto& c : contrasts)
    md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", c.row.study, c.row.family, c.row.statistic,
                      cell(c.row.llm_value), cell(c.row.human_value),
                      c.diff ? fmt::format("{:+.2f}", *c.diff) : std::string("n/a"));
  return md;
}

}  // namespace deltalab
