// Regenerates the bundled transcript store by running the demo design in
// Record mode against the in-process mock endpoint.
//
//   record_transcripts <design.json> <endpoint.json> <store.jsonl> <manifest.json>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "deltalab/agents.hpp"
#include "deltalab/dataset.hpp"
#include "deltalab/llm_adapter.hpp"
#include "support/mock_llm.hpp"

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: record_transcripts <design.json> <endpoint.json> <store.jsonl> <manifest.json>\n";
    return 2;
  }
  using namespace deltalab;
  std::ifstream design_in(argv[1]), endpoint_in(argv[2]);
  const auto design = design_from_json(nlohmann::json::parse(design_in));
  auto cfg = endpoint_from_json(nlohmann::json::parse(endpoint_in));

  testing::MockLlm mock;
  setenv(cfg.token_env.c_str(), mock.expected_token.c_str(), 1);
  cfg.base_url = mock.base_url();
  cfg.mode = Transport::Record;
  cfg.store = argv[3];
  std::filesystem::remove(cfg.store);

  TranscriptStore store(cfg.store);
  const auto result = run_llm_experiment(design, cfg, store);
  nlohmann::json manifest{{"schema_version", 1},
                          {"design", std::filesystem::path(argv[1]).filename().string()},
                          {"queries", result.queries},
                          {"unparseable", result.unparseable},
                          {"rows", result.dataset.rows.size()},
                          {"dataset_hash", dataset_hash(result.dataset)}};
  std::ofstream(argv[4]) << manifest.dump(2) << '\n';
  std::cout << manifest.dump(2) << '\n';
  return 0;
}
