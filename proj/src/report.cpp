#include "deltalab/report.hpp"

#include <fstream>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab {

namespace {

std::string num(const nlohmann::json& v, const char* spec = "{:.4f}") {
  if (v.is_null()) return "n/a";
  if (v.is_number()) return fmt::format(fmt::runtime(spec), v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string csv_num(const nlohmann::json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number()) return fmt::format("{}", v.get<double>());
  return v.get<std::string>();
}

const char* kSignatureKeys[] = {"conditional_dependence", "distributional_asymmetry", "path_dependence",
                                "paraphrase_robustness"};

std::string signature_section(const nlohmann::json& p) {
  std::string md = fmt::format("**Classification:** {}\n\n", p.at("classification").get<std::string>());
  md += "| test | statistic | p | effect | 95% CI | direction | flagged |\n|---|---|---|---|---|---|---|\n";
  auto row = [&](const nlohmann::json& r) {
    std::string ci = "n/a";
    if (r.contains("ci95") && r.at("ci95").is_array()) ci = fmt::format("[{}, {}]", num(r["ci95"][0]), num(r["ci95"][1]));
    std::string dir = r.value("direction_observed", nlohmann::json()).is_string() ? r["direction_observed"].get<std::string>() : "";
    if (r.value("direction_predicted", nlohmann::json()).is_string())
      dir += " (pred. " + r["direction_predicted"].get<std::string>() + ")";
    md += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", r.at("test").get<std::string>(), num(r["statistic"]),
                      num(r["p_value"]), num(r["effect"]), ci, dir, r.at("flagged").get<bool>() ? "yes" : "no");
  };
  for (const char* k : kSignatureKeys)
    if (p.contains(k) && !p[k].is_null()) row(p[k]);
  if (p.contains("llm_covariates"))
    for (const auto& r : p["llm_covariates"]) row(r);
  return md;
}

std::string gradient_section(const nlohmann::json& g) {
  std::string md = "| game | d | hedges g | 95% CI | n named | n aggregate | verdict |\n|---|---|---|---|---|---|---|\n";
  for (const auto& e : g.at("games"))
    md += fmt::format("| {} | {} | {} | [{}, {}] | {} | {} | {} |\n", e.at("game_id").get<std::string>(),
                      num(e["d"], "{:.3f}"), num(e["hedges_g"], "{:.3f}"), num(e["ci95"][0], "{:.3f}"),
                      num(e["ci95"][1], "{:.3f}"), e.at("n_named").get<int>(), e.at("n_aggregate").get<int>(),
                      e.at("verdict").get<std::string>());
  md += fmt::format("\nPooled d = {} (se {}); overall verdict: **{}**\n", num(g["pooled_d"], "{:.3f}"),
                    num(g["pooled_se"], "{:.3f}"), g.at("verdict").get<std::string>());
  if (g.contains("trend_tau") && !g["trend_tau"].is_null())
    md += fmt::format("Trend across ordering: tau = {}, monotone = {}\n", num(g["trend_tau"], "{:.3f}"),
                      num(g["trend_monotone"]));
  return md;
}

std::string evidence_section(const nlohmann::json& rows) {
  std::string md = "| study | game | statistic | LLM | human | diff |\n|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    md += fmt::format("| {} | {} | {} | {} | {} | {} |\n", r.at("study").get<std::string>(),
                      r.at("family").get<std::string>(), r.at("statistic").get<std::string>(),
                      num(r["llm_value"], "{:.2f}"), num(r["human_value"], "{:.2f}"), num(r["diff"], "{:+.2f}"));
  return md;
}

}  // namespace

std::string config_hash(const nlohmann::json& config) {
  return fmt::format("fnv1a64:{:016x}", fnv1a64(config.dump()));
}

nlohmann::json result_envelope(const std::string& command, std::uint64_t seed, const nlohmann::json& config,
                               const nlohmann::json& inputs, nlohmann::json result) {
  return nlohmann::json{{"schema_version", kResultSchemaVersion},
                        {"command", command},
                        {"seed", seed},
                        {"config", config},
                        {"config_hash", config_hash(config)},
                        {"inputs", inputs},
                        {"result", std::move(result)}};
}

std::string report_markdown(const nlohmann::json& env) {
  if (!env.is_object() || !env.contains("command") || !env.contains("result"))
    throw Error("ParseError", "not a result file: expected command and result fields");
  if (env.value("schema_version", 0) != kResultSchemaVersion)
    throw Error("ParseError", fmt::format("unsupported result schema_version {}", env.value("schema_version", 0)));
  const auto command = env.at("command").get<std::string>();
  const auto& r = env.at("result");
  std::string md = fmt::format("# {} results\n\n", command);
  md += fmt::format("- seed: {}\n- config hash: {}\n", env.value("seed", std::uint64_t{0}),
                    env.value("config_hash", std::string()));
  if (env.contains("inputs") && env["inputs"].is_object())
    for (const auto& [k, v] : env["inputs"].items()) md += fmt::format("- {}: {}\n", k, num(v, "{}"));
  md += "\n";
  if (command == "analyze") {
    md += signature_section(r);
  } else if (command == "moderator") {
    md += gradient_section(r);
  } else if (command == "evidence") {
    md += evidence_section(r);
  } else if (command == "solve") {
    md += "| role | benchmark | kind | prescription |\n|---|---|---|---|\n";
    for (const auto& b : r.at("baselines"))
      md += fmt::format("| {} | {} | {} | {} |\n", b.at("role").get<int>(), b.at("benchmark").get<std::string>(),
                        b.at("kind").get<std::string>(),
                        b.at("kind") == "Point" ? num(b["point"], "{:.6g}") : b.at("support").dump());
  } else if (command == "power") {
    md += fmt::format("n per arm = {} (normal approximation {}; Monte Carlo power {})\n", r.at("n_per_arm").get<int>(),
                      r.at("normal_approx_n").get<int>(), num(r["mc_power"]));
  } else {
    md += "```json\n" + r.dump(2) + "\n```\n";
  }
  return md;
}

std::map<std::string, std::string> report_plot_tables(const nlohmann::json& env) {
  std::map<std::string, std::string> out;
  const auto command = env.at("command").get<std::string>();
  const auto& r = env.at("result");
  if (command == "analyze") {
    std::string csv = "test,statistic,p_value,effect,ci_lo,ci_hi,flagged,n\n";
    auto row = [&](const nlohmann::json& t) {
      const bool ci = t.contains("ci95") && t["ci95"].is_array();
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", t.at("test").get<std::string>(), csv_num(t["statistic"]),
                         csv_num(t["p_value"]), csv_num(t["effect"]), ci ? csv_num(t["ci95"][0]) : "",
                         ci ? csv_num(t["ci95"][1]) : "", csv_num(t["flagged"]), t.value("n", 0));
    };
    for (const char* k : kSignatureKeys)
      if (r.contains(k) && !r[k].is_null()) row(r[k]);
    for (const auto& t : r.value("llm_covariates", nlohmann::json::array())) row(t);
    out["signature_tests.csv"] = csv;
  } else if (command == "moderator") {
    std::string csv = "game_id,d,hedges_g,ci_lo,ci_hi,n_named,n_aggregate,verdict\n";
    for (const auto& e : r.at("games"))
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", e.at("game_id").get<std::string>(), csv_num(e["d"]),
                         csv_num(e["hedges_g"]), csv_num(e["ci95"][0]), csv_num(e["ci95"][1]),
                         e.at("n_named").get<int>(), e.at("n_aggregate").get<int>(), e.at("verdict").get<std::string>());
    out["moderator_effects.csv"] = csv;
  } else if (command == "evidence") {
    std::string csv = "study,family,statistic,llm_value,human_value,diff\n";
    for (const auto& e : r)
      csv += fmt::format("{},{},{},{},{},{}\n", e.at("study").get<std::string>(), e.at("family").get<std::string>(),
                         e.at("statistic").get<std::string>(), csv_num(e["llm_value"]), csv_num(e["human_value"]),
                         csv_num(e["diff"]));
    out["evidence_contrasts.csv"] = csv;
  }
  return out;
}

std::vector<std::filesystem::path> write_report(const nlohmann::json& envelope, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IOError", "cannot write " + path.string());
    out << text;
    written.push_back(path);
  };
  put("report.md", report_markdown(envelope));
  for (const auto& [name, text] : report_plot_tables(envelope)) put(name, text);
  return written;
}

}  // namespace deltalab
