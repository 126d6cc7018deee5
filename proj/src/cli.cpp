#include "deltalab/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "deltalab/agents.hpp"
#include "deltalab/baselines.hpp"
#include "deltalab/dataset.hpp"
#include "deltalab/error.hpp"
#include "deltalab/evidence.hpp"
#include "deltalab/llm_adapter.hpp"
#include "deltalab/moderator.hpp"
#include "deltalab/pipeline.hpp"
#include "deltalab/report.hpp"
#include "deltalab/rng.hpp"
#include "deltalab/stats.hpp"

namespace deltalab {

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  bool lenient = false;
  std::optional<int> permutations;
  std::optional<int> bootstrap;
  std::optional<int> grid_points;
  std::string config_path;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("ParseError", path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("IOError", "cannot write " + path);
  out << j.dump(2) << '\n';
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  GlobalOptions g;

  nlohmann::json config() const {
    if (g.config_path.empty()) return nlohmann::json::object();
    auto j = read_json(g.config_path);
    if (!j.is_object()) throw Error("ParseError", g.config_path + ": config must be a JSON object");
    return j;
  }

  std::uint64_t seed(const nlohmann::json& cfg) const {
    if (g.seed) return *g.seed;
    return cfg.value("seed", kDefaultSeed);
  }

  void log_run(const std::string& command, std::uint64_t seed, const nlohmann::json& effective) {
    err_ << fmt::format("[deltalab] {} seed={} config_hash={}\n", command, seed, config_hash(effective));
  }

  void emit(const nlohmann::json& envelope) {
    if (g.out.empty()) return;
    write_json(g.out, envelope);
    out_ << "wrote " << g.out << '\n';
  }

  std::ostream& out() { return out_; }

 private:
  std::ostream& out_;
  std::ostream& err_;
};

// ---- solve ------------------------------------------------------------------

struct SolveArgs {
  std::string game = "ultimatum";
  std::string game_file;
  std::string game_id;
  std::string benchmark = "nash";
  int k = 1;
  double tau = 1.5;
  double lambda = 1.0;
  std::optional<int> role;
  std::string generate;  // "RxC"
  std::map<std::string, double> params;
};

const std::vector<std::pair<std::string, std::string>>& solve_param_flags() {
  static const std::vector<std::pair<std::string, std::string>> flags{
      {"pot", "pot P (Dictator, Ultimatum, Trust)"},
      {"unit", "money unit u (Ultimatum)"},
      {"multiplier", "return multiplier (Trust)"},
      {"T", "temptation payoff (PD)"},
      {"R", "reward payoff (PD)"},
      {"P", "punishment payoff (PD)"},
      {"S", "sucker payoff (PD)"},
      {"endowment", "endowment E (PublicGoods)"},
      {"mpcr", "marginal per-capita return m (PublicGoods)"},
      {"p", "target multiplier p (PBeauty)"},
      {"H", "upper bound H (PBeauty)"},
      {"value", "private value V (auctions)"},
      {"value_lo", "value distribution lower bound (first-price)"},
      {"value_hi", "value distribution upper bound (auctions)"},
      {"prize", "prize V (AllPay, Tullock)"},
      {"r", "contest exponent r (Tullock)"},
      {"n", "number of players"},
  };
  return flags;
}

Benchmark parse_benchmark(const std::string& name, int k, double tau, double lambda) {
  if (name == "nash") return Benchmark::nash();
  if (name == "spe") return Benchmark::spe();
  if (name == "level-k") return Benchmark::level_k(k);
  if (name == "ch") return Benchmark::cognitive_hierarchy(k, tau);
  if (name == "qre") return Benchmark::logit_qre(lambda);
  throw UsageError("unknown benchmark '" + name + "' (nash, spe, level-k, ch, qre)");
}

GameSpec resolve_game(const SolveArgs& a, std::uint64_t seed) {
  if (!a.generate.empty()) {
    int rows = 0, cols = 0;
    if (std::sscanf(a.generate.c_str(), "%dx%d", &rows, &cols) != 2)
      throw UsageError("--generate expects ROWSxCOLS, e.g. 3x3");
    return generate_novel_game(seed, rows, cols);
  }
  if (!a.game_id.empty()) {
    auto games = a.game_file.empty() ? bundled_games() : load_game_registry(a.game_file);
    const auto it = games.find(a.game_id);
    if (it == games.end()) throw Error("UnknownGame", a.game_id);
    return it->second;
  }
  return make_game(family_from_string(a.game), a.params, a.game);
}

void run_solve(Runner& run, const SolveArgs& a) {
  const auto cfg = run.config();
  const auto seed = run.seed(cfg);
  const auto game = resolve_game(a, seed);
  const auto bm = parse_benchmark(a.benchmark, a.k, a.tau, a.lambda);
  QreOptions qre;
  qre.grid_points = run.g.grid_points.value_or(cfg.value("grid_points", qre.grid_points));
  const nlohmann::json effective{{"benchmark", bm.tag()}, {"grid_points", qre.grid_points}};
  run.log_run("solve", seed, effective);

  auto baselines = nlohmann::json::array();
  const int roles = static_cast<int>(game.action_spaces.size());
  for (int r = 0; r < roles; ++r) {
    if (a.role && *a.role != r) continue;
    const auto b = compute_baseline(game, r, bm, qre);
    baselines.push_back(b);
    if (b.kind == BaselineKind::Point) {
      run.out() << fmt::format("role {} ({}): {:.4g}\n", r, bm.tag(), b.point);
    } else {
      std::string mix;
      for (std::size_t i = 0; i < b.support.size(); ++i)
        if (b.weights[i] > 1e-9)
          mix += fmt::format("{}{}:{:.4g}", mix.empty() ? "" : " ", decision_to_string(b.support[i]), b.weights[i]);
      run.out() << fmt::format("role {} ({}): mixed, normalized mean {:.4g} [{}]\n", r, bm.tag(),
                               b.normalized_mean(game), mix.size() > 400 ? mix.substr(0, 400) + " ..." : mix);
    }
  }
  if (baselines.empty()) throw UsageError(fmt::format("--role must be in [0, {})", roles));
  run.emit(result_envelope("solve", seed, effective, {{"game", game}},
                           {{"game_id", game.id}, {"baselines", std::move(baselines)}}));
}

// ---- simulate / llm-run -------------------------------------------------------

void run_simulate(Runner& run, const std::string& design_path) {
  const auto cfg = run.config();
  auto design = design_from_json(read_json(design_path));
  if (run.g.seed || cfg.contains("seed")) design.master_seed = run.seed(cfg);
  const nlohmann::json effective = design;
  run.log_run("simulate", design.master_seed, effective);
  if (run.g.out.empty()) throw UsageError("simulate needs --out <dataset.csv>");
  const auto data = run_experiment(design);
  write_dataset(run.g.out, data);
  run.out() << fmt::format("wrote {} rows ({} cells) to {} [{}]\n", data.rows.size(), design.cell_count(), run.g.out,
                           dataset_hash(data));
}

void run_llm(Runner& run, const std::string& design_path, const std::string& endpoint_path, const std::string& mode,
             const std::string& store_path) {
  const auto cfg = run.config();
  auto design = design_from_json(read_json(design_path));
  if (run.g.seed || cfg.contains("seed")) design.master_seed = run.seed(cfg);
  auto endpoint = endpoint_path.empty() ? EndpointConfig{} : endpoint_from_json(read_json(endpoint_path));
  // A relative store in the endpoint file is relative to that file.
  if (!endpoint.store.empty() && endpoint.store.is_relative())
    endpoint.store = std::filesystem::path(endpoint_path).parent_path() / endpoint.store;
  if (!mode.empty()) endpoint.mode = transport_from_string(mode);
  if (!store_path.empty()) endpoint.store = store_path;
  if (endpoint.store.empty()) throw UsageError("llm-run needs a transcript store (--store or endpoint.store)");
  nlohmann::json effective{{"design", design}, {"endpoint", endpoint}};
  effective["endpoint"].erase("store");
  run.log_run("llm-run", design.master_seed, effective);
  if (run.g.out.empty()) throw UsageError("llm-run needs --out <dataset.csv>");
  TranscriptStore store(endpoint.store);
  const auto result = run_llm_experiment(design, endpoint, store);
  write_dataset(run.g.out, result.dataset);
  run.out() << fmt::format(
      "mode {}: {} queries, {} unparseable, {} out of range, {} network requests; wrote {} rows to {} [{}]\n",
      to_string(endpoint.mode), result.queries, result.unparseable, result.out_of_range, result.network_requests,
      result.dataset.rows.size(), run.g.out, dataset_hash(result.dataset));
}

// ---- analyze / moderator ------------------------------------------------------

AnalysisOptions analysis_options(Runner& run, const nlohmann::json& cfg) {
  auto o = analysis_options_from_json(cfg);
  o.tests.seed = run.seed(cfg);
  o.gradient.seed = o.tests.seed;
  if (run.g.permutations) o.tests.permutations = *run.g.permutations;
  if (run.g.bootstrap) o.tests.bootstrap = o.gradient.bootstrap = *run.g.bootstrap;
  if (o.tests.permutations < 1 || o.tests.bootstrap < 0) throw UsageError("--permutations must be >= 1");
  return o;
}

Dataset load_input(Runner& run, const std::string& path, const std::string& games) {
  LoadOptions lo;
  lo.lenient = run.g.lenient;
  if (!games.empty()) lo.extra_games = load_game_registry(games);
  auto d = load_dataset(path, lo);
  if (d.dropped_rows > 0) run.out() << fmt::format("dropped {} malformed row(s) (--lenient)\n", d.dropped_rows);
  return d;
}

nlohmann::json input_summary(const std::string& path, const Dataset& d) {
  return {{"data", std::filesystem::path(path).filename().string()},
          {"data_hash", dataset_hash(d)},
          {"rows", d.rows.size()},
          {"dropped_rows", d.dropped_rows}};
}

void run_analyze(Runner& run, const std::string& path, const std::string& games, const std::string& deltas_csv) {
  const auto cfg = run.config();
  const auto opts = analysis_options(run, cfg);
  const auto effective = analysis_options_json(opts);
  run.log_run("analyze", opts.tests.seed, effective);
  const auto data = load_input(run, path, games);
  if (!deltas_csv.empty()) {
    std::ofstream f(deltas_csv, std::ios::binary);
    if (!f) throw Error("IOError", "cannot write " + deltas_csv);
    write_delta_observations_csv(f, dataset_deltas(data, opts));
  }
  const auto profile = analyze_dataset(data, opts);
  run.out() << profile_markdown(profile);
  run.emit(result_envelope("analyze", opts.tests.seed, effective, input_summary(path, data), profile));
}

void run_moderator(Runner& run, const std::string& path, const std::string& games) {
  const auto cfg = run.config();
  const auto opts = analysis_options(run, cfg);
  auto effective = analysis_options_json(opts);
  run.log_run("moderator", opts.gradient.seed, effective);
  const auto data = load_input(run, path, games);
  const auto report = moderator_report(data, opts);
  run.out() << gradient_markdown(report);
  run.emit(result_envelope("moderator", opts.gradient.seed, effective, input_summary(path, data), report));
}

// ---- report / evidence / power / certify --------------------------------------

void run_report(Runner& run, const std::string& in) {
  if (run.g.out.empty()) throw UsageError("report needs --out <directory>");
  const auto env = read_json(in);
  for (const auto& p : write_report(env, run.g.out)) run.out() << "wrote " << p.string() << '\n';
}

void run_evidence(Runner& run, const std::string& fixture) {
  const auto path = fixture.empty() ? bundled_evidence_path() : std::filesystem::path(fixture);
  const auto contrasts = evidence_summary(load_evidence(path));
  run.log_run("evidence", 0, nlohmann::json::object());
  run.out() << evidence_markdown(contrasts);
  run.emit(result_envelope("evidence", 0, nlohmann::json::object(), {{"fixture", path.filename().string()}},
                           contrasts));
}

void run_power(Runner& run, double d, double alpha, double power, int simulations) {
  const auto cfg = run.config();
  PowerOptions po;
  po.seed = run.g.seed ? *run.g.seed : cfg.value("seed", po.seed);
  po.simulations = simulations;
  const nlohmann::json effective{{"d", d}, {"alpha", alpha}, {"power", power}, {"simulations", po.simulations}};
  run.log_run("power", po.seed, effective);
  const int n = power_n_per_arm(d, alpha, power, po);
  // Confirmation on a stream independent of the one used by the search.
  const double mc = stats::mc_power_two_sample(n, n, d, alpha, po.simulations, derive_seed(po.seed, 0xc0f1U));
  run.out() << fmt::format("n per arm = {} (normal approximation {}, exact t power {:.4f}, Monte Carlo {:.4f})\n", n,
                           power_n_normal_approx(d, alpha, power), exact_power_two_sample(n, d, alpha), mc);
  run.emit(result_envelope("power", po.seed, effective, nlohmann::json::object(),
                           {{"n_per_arm", n},
                            {"normal_approx_n", power_n_normal_approx(d, alpha, power)},
                            {"exact_power", exact_power_two_sample(n, d, alpha)},
                            {"mc_power", mc}}));
}

void run_certify(Runner& run, const SolveArgs& a) {
  const auto cfg = run.config();
  const auto seed = run.seed(cfg);
  if (a.generate.empty() && a.game_id.empty()) {
    if (a.game.empty()) throw UsageError("certify needs --generate, --game-id or --game");
    const auto family = family_from_string(a.game);
    throw Error("WrongFamily", to_string(family) + " is a canonical game; only generated games are certified");
  }
  const auto game = resolve_game(a, seed);
  run.log_run("certify", seed, nlohmann::json::object());
  const auto checklist = emit_certification_checklist(game);
  run.out() << fmt::format("{} ({}): payoff hash {}, {} corpora to search\n", checklist.game_id,
                           checklist.synthetic_name, checklist.payoff_hash, checklist.corpora.size());
  run.emit(result_envelope("certify", seed, nlohmann::json::object(), {{"game", game}}, checklist));
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner run(out, err);
  CLI::App app{"deltalab: behavioural residuals in strategic games", "deltalab"};
  app.require_subcommand(1);
  app.fallthrough();

  auto& g = run.g;
  app.add_option("--seed", g.seed, "Master seed (default 1; power uses 0x5eed)");
  app.add_option("--out", g.out, "Output path: result JSON, dataset CSV, or report directory");
  app.add_flag("--lenient", g.lenient, "Drop malformed dataset rows instead of failing");
  app.add_option("--permutations", g.permutations, "Permutation draws per test (default 10000)");
  app.add_option("--bootstrap", g.bootstrap, "Bootstrap resamples (default 5000)");
  app.add_option("--grid-points", g.grid_points, "Action grid for mixed baselines and QRE (default 101)");
  app.add_option("--config", g.config_path, "JSON file of defaults; flags override it");

  std::function<void()> action;

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Print classical baselines for a game");
  s->add_option("--game", solve.game, "Game family (ultimatum, dictator, trust, pd, publicgoods, pbeauty, "
                                      "firstprice, secondprice, allpay, tullock)")
      ->capture_default_str();
  s->add_option("--game-id", solve.game_id, "Game id from the bundled or --games registry");
  s->add_option("--games", solve.game_file, "Game registry JSON");
  s->add_option("--generate", solve.generate, "Generate a novel RxC bimatrix game from --seed");
  s->add_option("--benchmark", solve.benchmark, "nash, spe, level-k, ch or qre")->capture_default_str();
  s->add_option("--k", solve.k, "Level for level-k / CH")->capture_default_str();
  s->add_option("--tau", solve.tau, "CH Poisson mean")->capture_default_str();
  s->add_option("--lambda", solve.lambda, "QRE precision")->capture_default_str();
  s->add_option("--role", solve.role, "Only this role (default: all)");
  for (const auto& [name, help] : solve_param_flags())
    s->add_option_function<double>("--" + name, [&solve, key = name](double v) { solve.params[key] = v; }, help);
  s->callback([&] { action = [&] { run_solve(run, solve); }; });

  std::string design_path;
  auto* sim = app.add_subcommand("simulate", "Run an experiment design with synthetic agents");
  sim->add_option("--design", design_path, "Design JSON")->required()->check(CLI::ExistingFile);
  sim->callback([&] { action = [&] { run_simulate(run, design_path); }; });

  std::string data_path, games_path, deltas_csv;
  auto* an = app.add_subcommand("analyze", "Run the signature battery on a dataset");
  an->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  an->add_option("--games", games_path, "Extra game registry JSON");
  an->add_option("--deltas", deltas_csv, "Also write the residuals as tidy CSV");
  an->callback([&] { action = [&] { run_analyze(run, data_path, games_path, deltas_csv); }; });

  auto* mo = app.add_subcommand("moderator", "Run the individuation gradient test");
  mo->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  mo->add_option("--games", games_path, "Extra game registry JSON");
  mo->callback([&] { action = [&] { run_moderator(run, data_path, games_path); }; });

  std::string endpoint_path, mode, store_path;
  auto* llm = app.add_subcommand("llm-run", "Execute a design against a chat endpoint (Live, Record or Replay)");
  llm->add_option("--design", design_path, "Design JSON")->required()->check(CLI::ExistingFile);
  llm->add_option("--endpoint", endpoint_path, "Endpoint JSON (token read from the variable it names, "
                                               "default DELTALAB_API_TOKEN)");
  llm->add_option("--mode", mode, "Override the endpoint mode: live, record or replay");
  llm->add_option("--store", store_path, "Transcript store (JSON lines)");
  llm->callback([&] { action = [&] { run_llm(run, design_path, endpoint_path, mode, store_path); }; });

  std::string result_path;
  auto* rep = app.add_subcommand("report", "Render a result JSON to Markdown and plot-ready CSV");
  rep->add_option("--in", result_path, "Result JSON")->required()->check(CLI::ExistingFile);
  rep->callback([&] { action = [&] { run_report(run, result_path); }; });

  std::string fixture;
  auto* ev = app.add_subcommand("evidence", "Tabulate the bundled LLM-versus-human evidence fixture");
  ev->add_option("--fixture", fixture, "Fixture JSON (default: bundled)");
  ev->callback([&] { action = [&] { run_evidence(run, fixture); }; });

  double d = 0.5, alpha = 0.05, power = 0.8;
  int simulations = 10000;
  auto* pw = app.add_subcommand("power", "Sample size per arm for a two-sample t test");
  pw->add_option("--d", d, "Effect size")->capture_default_str();
  pw->add_option("--alpha", alpha, "Two-sided level")->capture_default_str();
  pw->add_option("--power", power, "Target power")->capture_default_str();
  pw->add_option("--simulations", simulations, "Monte Carlo replicates per candidate n")->capture_default_str();
  pw->callback([&] { action = [&] { run_power(run, d, alpha, power, simulations); }; });

  SolveArgs cert;
  cert.game.clear();
  auto* ce = app.add_subcommand("certify", "Emit the novelty certification checklist for a generated game");
  ce->add_option("--generate", cert.generate, "Generate a RxC game from --seed");
  ce->add_option("--game-id", cert.game_id, "Game id from the bundled or --games registry");
  ce->add_option("--games", cert.game_file, "Game registry JSON");
  ce->add_option("--game", cert.game, "Canonical family (rejected: only generated games are certified)");
  ce->callback([&] { action = [&] { run_certify(run, cert); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    action();
    return 0;
  } catch (const UsageError& e) {
    err << e.name() << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << e.name() << '\n' << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "ParseError\n" << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "IOError\n" << e.what() << '\n';
    return 1;
  }
}

}  // namespace deltalab
