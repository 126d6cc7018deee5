#include "deltalab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/moderator.hpp"
#include "deltalab/rng.hpp"
#include "deltalab/stats.hpp"

namespace deltalab {

namespace {

bool is_binary(const ActionSpace& s) {
  const auto* d = std::get_if<DiscreteSet>(&s);
  return d != nullptr && d->labels.size() == 2;
}

bool has_unit_scale(const GameSpec& g, int role) {
  return std::holds_alternative<ContinuousInterval>(g.action_space(role)) || is_binary(g.action_space(role));
}

std::optional<double> unit_of(const GameSpec& g, int role, const Decision& d) {
  if (!has_unit_scale(g, role)) return std::nullopt;
  return normalize_action(g, role, d);
}

double draw_uniform_factor(Engine& eng, double spread) {
  if (spread <= 0) return 1.0;
  return std::uniform_real_distribution<double>(1.0 - spread, 1.0 + spread)(eng);
}

}  // namespace

std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Classical: return "Classical";
    case AgentKind::BoundedHuman: return "BoundedHuman";
    case AgentKind::Retrieval: return "Retrieval";
    case AgentKind::Reasoning: return "Reasoning";
    case AgentKind::Scripted: return "Scripted";
  }
  return "Classical";
}

AgentKind agent_kind_from_string(const std::string& s) {
  std::string k;
  for (char c : s)
    if (c != '_' && c != '-') k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "classical") return AgentKind::Classical;
  if (k == "boundedhuman") return AgentKind::BoundedHuman;
  if (k == "retrieval") return AgentKind::Retrieval;
  if (k == "reasoning") return AgentKind::Reasoning;
  if (k == "scripted") return AgentKind::Scripted;
  throw Error("InvalidParams", "unknown agent kind '" + s + "'");
}

void AgentConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error("InvalidParams", what); };
  if (!(noise_sd >= 0)) bad("noise_sd must be >= 0");
  if (!(fairness_alpha >= 0)) bad("fairness_alpha must be >= 0");
  if (!(loss_aversion >= 1)) bad("loss_aversion must be >= 1");
  if (!(imitation_weight >= 0 && imitation_weight < 1)) bad("imitation_weight must lie in [0, 1)");
  if (!(anchor_weight >= 0 && anchor_weight < 1)) bad("anchor_weight must lie in [0, 1)");
  if (!(anchor >= 0 && anchor <= 1)) bad("anchor must lie in [0, 1]");
  if (!(individuation_gamma >= 0)) bad("individuation_gamma must be >= 0");
  if (!(paraphrase_amplitude >= 0)) bad("paraphrase_amplitude must be >= 0");
  if (k_max < 0) bad("k_max must be >= 0");
  if (!(unit_cost > 0)) bad("unit_cost must be > 0");
  if (!(heterogeneity >= 0 && heterogeneity < 1)) bad("heterogeneity must lie in [0, 1)");
  if (kind == AgentKind::Scripted && !scripted_action) bad("scripted agent needs an action");
}

double paraphrase_offset(int paraphrase_id) {
  const auto h = mix64(fnv1a64(fmt::format("paraphrase:{}", paraphrase_id)));
  return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
}

// ---- Agent -----------------------------------------------------------------

Agent::Agent(AgentConfig config, const GameSpec& game, int role) : config_(std::move(config)), game_(game), role_(role) {
  config_.validate();
  const auto& space = game_.action_space(role_);
  if (const auto* d = std::get_if<DiscreteSet>(&space); d != nullptr && d->labels.size() == 1) {
    fixed_label_ = true;
    return;
  }
  if (config_.kind == AgentKind::Scripted) {
    if (has_unit_scale(game_, role_)) base_ = normalize_action(game_, role_, *config_.scripted_action);
    return;
  }
  if (!has_unit_scale(game_, role_))
    throw Error("UnsupportedGameForKind", "agents need a continuous or binary action space");
  base_ = compute_baseline(game_, role_, config_.benchmark).normalized_mean(game_);
  bargaining_ = game_.family == Family::Dictator || game_.family == Family::Ultimatum || game_.family == Family::Trust;
  if (config_.kind == AgentKind::Reasoning) {
    for (int k = 0; k <= config_.k_max; ++k) {
      try {
        level_k_unit_.push_back(normalize_action(game_, role_, level_k_action(game_, role_, k)));
      } catch (const Error& e) {
        if (e.name() != "Unsupported") throw;
        level_k_unit_.push_back(base_);  // degenerate level-k: play the baseline
      }
    }
  }
}

Agent Agent::with_subject(std::uint64_t subject_seed) const {
  Agent out = *this;
  if (config_.kind != AgentKind::BoundedHuman) return out;
  auto eng = make_engine(subject_seed);
  auto& c = out.config_;
  const double h = c.heterogeneity;
  c.fairness_alpha *= draw_uniform_factor(eng, h);
  c.imitation_weight = std::min(0.99, c.imitation_weight * draw_uniform_factor(eng, h));
  c.anchor_weight = std::min(0.99, c.anchor_weight * draw_uniform_factor(eng, h));
  c.individuation_gamma *= draw_uniform_factor(eng, h);
  c.loss_aversion = std::max(1.0, c.loss_aversion * draw_uniform_factor(eng, h));
  return out;
}

int Agent::reasoning_level(const Condition& condition) const {
  const double levels = std::floor(condition.compute_budget / config_.unit_cost + 1e-9);
  return static_cast<int>(std::clamp(levels, 0.0, static_cast<double>(config_.k_max)));
}

double Agent::structured_delta(const RoundState& state, const Condition& condition) const {
  if (config_.kind != AgentKind::BoundedHuman) return 0.0;
  double core = 0.0;
  if (bargaining_ && config_.fairness_alpha > 0) {
    const double a = config_.fairness_alpha;
    core += a / (1.0 + 2.0 * a) - base_;
  }
  if (config_.imitation_weight > 0 && (state.own_lag || state.peer_lag)) {
    // Imitation of the realized group outcome: all players' last actions.
    double sum = 0.0;
    int count = 0;
    for (const auto& v : {state.own_lag, state.peer_lag})
      if (v) {
        sum += *v;
        ++count;
      }
    core += config_.imitation_weight * (sum / count - base_);
  }
  core += config_.anchor_weight * (config_.anchor - base_);
  const double multiplier = condition.individuation == Individuation::Named ? 1.0 + config_.individuation_gamma : 1.0;
  return multiplier * core;
}

Decision Agent::act(const RoundState& state, const Condition& condition, std::uint64_t seed) const {
  const auto& space = game_.action_space(role_);
  if (fixed_label_) return std::get<DiscreteSet>(space).labels.front();
  if (config_.kind == AgentKind::Scripted) return *config_.scripted_action;

  auto eng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z = config_.noise_sd > 0 ? config_.noise_sd * normal(eng) : 0.0;

  double unit = base_;
  switch (config_.kind) {
    case AgentKind::Classical: unit = base_ + z; break;
    case AgentKind::BoundedHuman: {
      double noise = z;
      if (condition.framing == Framing::Loss && noise > 0) noise *= config_.loss_aversion;
      if (condition.framing == Framing::Gain && noise < 0) noise *= config_.loss_aversion;
      unit = base_ + structured_delta(state, condition) + noise;
      break;
    }
    case AgentKind::Retrieval:
      unit = base_ + config_.paraphrase_amplitude * paraphrase_offset(condition.paraphrase_id) + z;
      break;
    case AgentKind::Reasoning:
      unit = level_k_unit_[static_cast<std::size_t>(reasoning_level(condition))] + z;
      break;
    case AgentKind::Scripted: break;
  }
  unit = std::clamp(unit, 0.0, 1.0);
  if (std::holds_alternative<ContinuousInterval>(space)) return denormalize_action(game_, role_, unit);
  // Binary actions: the unit value is the probability of the first label.
  const auto& labels = std::get<DiscreteSet>(space).labels;
  const bool first = std::uniform_real_distribution<double>(0.0, 1.0)(eng) < unit;
  return first ? labels[0] : labels[1];
}

Decision act(const AgentConfig& agent, const GameSpec& game, int role, const RoundState& state,
             const Condition& condition, std::uint64_t seed) {
  return Agent(agent, game, role).act(state, condition, seed);
}

// ---- sessions --------------------------------------------------------------

std::vector<RoundRecord> run_session(const GameSpec& game, const std::vector<AgentConfig>& configs, int rounds,
                                     const Condition& condition, std::uint64_t seed, const SessionSpec& spec) {
  const auto roles = static_cast<int>(game.action_spaces.size());
  if (static_cast<int>(configs.size()) != roles)
    throw Error("RoleMismatch", fmt::format("game '{}' has {} roles but {} agents were given", game.id, roles,
                                            configs.size()));
  if (rounds < 1) throw Error("InvalidParams", "rounds must be >= 1");
  if (!spec.subject_ids.empty() && static_cast<int>(spec.subject_ids.size()) != roles)
    throw Error("RoleMismatch", "one subject id per role required");
  if (!spec.subject_seeds.empty() && static_cast<int>(spec.subject_seeds.size()) != roles)
    throw Error("RoleMismatch", "one subject seed per role required");

  std::vector<Agent> agents;
  std::vector<std::string> subjects;
  for (int r = 0; r < roles; ++r) {
    const auto subject_seed = spec.subject_seeds.empty() ? derive_seed(seed, 0x5bU, static_cast<std::uint64_t>(r))
                                                         : spec.subject_seeds[static_cast<std::size_t>(r)];
    agents.push_back(Agent(configs[static_cast<std::size_t>(r)], game, r).with_subject(subject_seed));
    subjects.push_back(spec.subject_ids.empty() ? fmt::format("{}-r{}", spec.session_id, r)
                                                : spec.subject_ids[static_cast<std::size_t>(r)]);
  }

  std::vector<RoundRecord> out;
  out.reserve(static_cast<std::size_t>(rounds * roles));
  std::vector<std::optional<double>> last(static_cast<std::size_t>(roles));
  std::vector<Decision> decisions(static_cast<std::size_t>(roles));
  for (int t = 1; t <= rounds; ++t) {
    for (int r = 0; r < roles; ++r) {
      RoundState state;
      state.round = t;
      state.own_lag = last[static_cast<std::size_t>(r)];
      double sum = 0.0;
      int count = 0;
      for (int o = 0; o < roles; ++o)
        if (o != r && last[static_cast<std::size_t>(o)]) {
          sum += *last[static_cast<std::size_t>(o)];
          ++count;
        }
      if (count > 0) state.peer_lag = sum / count;
      decisions[static_cast<std::size_t>(r)] =
          agents[static_cast<std::size_t>(r)].act(state, condition, derive_seed(seed, static_cast<std::uint64_t>(t),
                                                                                 static_cast<std::uint64_t>(r)));
    }
    for (int r = 0; r < roles; ++r) {
      RoundRecord rec;
      rec.session_id = spec.session_id;
      rec.subject_id = subjects[static_cast<std::size_t>(r)];
      rec.game_id = game.id;
      rec.role = r;
      rec.round = t;
      rec.condition = condition;
      rec.decision = decisions[static_cast<std::size_t>(r)];
      rec.arm = spec.arm;
      if (roles == 2) {
        rec.opponent_decision = decisions[static_cast<std::size_t>(1 - r)];
      } else if (roles > 2 && std::holds_alternative<ContinuousInterval>(game.action_space(r))) {
        double sum = 0.0;
        for (int o = 0; o < roles; ++o)
          if (o != r) sum += std::get<double>(decisions[static_cast<std::size_t>(o)]);
        rec.opponent_decision = sum / (roles - 1);
      }
      out.push_back(std::move(rec));
    }
    for (int r = 0; r < roles; ++r)
      last[static_cast<std::size_t>(r)] = unit_of(game, r, decisions[static_cast<std::size_t>(r)]);
  }
  return out;
}

// ---- experiments -----------------------------------------------------------

std::size_t ExperimentDesign::cell_count() const {
  return games.size() * arms.size() * individuation.size() * framing.size() * paraphrase_ids.size() *
         budgets.size() * stake_scales.size() * context_lengths.size();
}

Dataset run_experiment(const ExperimentDesign& design) {
  if (design.cell_count() == 0 || design.sessions_per_cell < 1)
    throw Error("EmptyDesign", "the design has no cells or no sessions per cell");
  if (design.rounds < 1) throw Error("InvalidParams", "rounds must be >= 1");

  struct Job {
    const GameSpec* game;
    const DesignArm* arm;
    const std::vector<AgentConfig>* agents;
    Condition condition;
    SessionSpec spec;
  };
  std::vector<Job> jobs;
  for (const auto& game : design.games) {
    for (const auto& arm : design.arms) {
      const auto label = arm.label.empty() ? to_string(arm.arm) : arm.label;
      const auto override_it = arm.per_game.find(game.id);
      const auto* agents = override_it != arm.per_game.end() ? &override_it->second : &arm.agents;
      int cell = 0;
      for (auto ind : design.individuation)
        for (auto frame : design.framing)
          for (int pid : design.paraphrase_ids)
            for (double budget : design.budgets)
              for (double stake : design.stake_scales)
                for (auto ctx : design.context_lengths) {
                  Condition c{ind, frame, pid, stake, budget, ctx};
                  for (int rep = 0; rep < design.sessions_per_cell; ++rep) {
                    Job job{&game, &arm, agents, c, {}};
                    job.spec.arm = arm.arm;
                    job.spec.session_id = fmt::format("{}-{}-c{:03}-s{:03}", label, game.id, cell, rep);
                    for (std::size_t r = 0; r < game.action_spaces.size(); ++r) {
                      const auto subject = design.within_subject
                                               ? fmt::format("{}-s{:03}-r{}", label, rep, r)
                                               : fmt::format("{}-{}-c{:03}-s{:03}-r{}", label, game.id, cell, rep, r);
                      job.spec.subject_ids.push_back(subject);
                      job.spec.subject_seeds.push_back(derive_seed(design.master_seed, fnv1a64(subject)));
                    }
                    jobs.push_back(std::move(job));
                  }
                  ++cell;
                }
    }
  }

  std::vector<std::vector<RoundRecord>> sessions(jobs.size());
  stats::parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& job = jobs[i];
    sessions[i] = run_session(*job.game, *job.agents, design.rounds, job.condition,
                              derive_seed(design.master_seed, fnv1a64(job.spec.session_id)), job.spec);
  });

  Dataset out;
  out.generator = "deltalab simulate";
  out.master_seed = design.master_seed;
  for (const auto& g : design.games) out.games.emplace(g.id, g);
  for (auto& s : sessions)
    for (auto& rec : s) out.rows.push_back(std::move(rec));
  return out;
}

// ---- JSON ------------------------------------------------------------------

namespace {

nlohmann::json decision_json(const Decision& d) {
  if (const auto* x = std::get_if<double>(&d)) return *x;
  return std::get<std::string>(d);
}

Decision decision_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  return j.get<std::string>();
}

nlohmann::json benchmark_json(const Benchmark& b) {
  nlohmann::json j{{"kind", b.tag()}};
  return j;
}

Benchmark benchmark_from_json(const nlohmann::json& j) {
  const auto kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  auto num = [&](const char* key, double fallback) {
    return j.is_object() && j.contains(key) ? j.at(key).get<double>() : fallback;
  };
  if (kind == "Nash" || kind == "nash") return Benchmark::nash();
  if (kind == "SPE" || kind == "spe") return Benchmark::spe();
  if (kind.rfind("LevelK", 0) == 0 || kind == "level-k")
    return Benchmark::level_k(static_cast<int>(num("k", 1)));
  if (kind.rfind("CognitiveHierarchy", 0) == 0 || kind == "ch")
    return Benchmark::cognitive_hierarchy(static_cast<int>(num("k", 1)), num("tau", 1.5));
  if (kind.rfind("LogitQRE", 0) == 0 || kind == "qre") return Benchmark::logit_qre(num("lambda", 1.0));
  throw Error("InvalidParams", "unknown benchmark '" + kind + "'");
}

GameSpec game_from_design(const nlohmann::json& j) {
  if (j.contains("action_spaces") || j.value("family", "") == to_string(Family::GeneratedBimatrix))
    return j.get<GameSpec>();
  auto params = j.value("params", Params{});
  const auto family = family_from_string(j.at("family").get<std::string>());
  return make_game(family, std::move(params), j.value("id", std::string{}));
}

template <typename T, typename F>
std::vector<T> list_or(const nlohmann::json& j, const char* key, std::vector<T> fallback, F convert) {
  if (!j.contains(key)) return fallback;
  std::vector<T> out;
  for (const auto& v : j.at(key)) out.push_back(convert(v));
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)},
                     {"noise_sd", c.noise_sd},
                     {"fairness_alpha", c.fairness_alpha},
                     {"loss_aversion", c.loss_aversion},
                     {"imitation_weight", c.imitation_weight},
                     {"anchor_weight", c.anchor_weight},
                     {"anchor", c.anchor},
                     {"individuation_gamma", c.individuation_gamma},
                     {"paraphrase_amplitude", c.paraphrase_amplitude},
                     {"k_max", c.k_max},
                     {"unit_cost", c.unit_cost},
                     {"heterogeneity", c.heterogeneity},
                     {"benchmark", benchmark_json(c.benchmark)}};
  if (c.benchmark.kind == Benchmark::Kind::LevelK || c.benchmark.kind == Benchmark::Kind::CognitiveHierarchy)
    j["benchmark"]["k"] = c.benchmark.k;
  if (c.benchmark.kind == Benchmark::Kind::CognitiveHierarchy) j["benchmark"]["tau"] = c.benchmark.tau;
  if (c.benchmark.kind == Benchmark::Kind::LogitQRE) j["benchmark"]["lambda"] = c.benchmark.lambda;
  if (c.scripted_action) j["scripted_action"] = decision_json(*c.scripted_action);
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
  try {
    c = AgentConfig{};
    c.kind = agent_kind_from_string(j.at("kind").get<std::string>());
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.fairness_alpha = j.value("fairness_alpha", c.fairness_alpha);
    c.loss_aversion = j.value("loss_aversion", c.loss_aversion);
    c.imitation_weight = j.value("imitation_weight", c.imitation_weight);
    c.anchor_weight = j.value("anchor_weight", c.anchor_weight);
    c.anchor = j.value("anchor", c.anchor);
    c.individuation_gamma = j.value("individuation_gamma", c.individuation_gamma);
    c.paraphrase_amplitude = j.value("paraphrase_amplitude", c.paraphrase_amplitude);
    c.k_max = j.value("k_max", c.k_max);
    c.unit_cost = j.value("unit_cost", c.unit_cost);
    c.heterogeneity = j.value("heterogeneity", c.heterogeneity);
    if (j.contains("benchmark")) c.benchmark = benchmark_from_json(j.at("benchmark"));
    if (j.contains("scripted_action")) c.scripted_action = decision_from_json(j.at("scripted_action"));
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("agent config: ") + e.what());
  }
  c.validate();
}

ExperimentDesign design_from_json(const nlohmann::json& j) {
  try {
    ExperimentDesign d;
    if (j.value("schema_version", 1) != 1) throw Error("ParseError", "unsupported design schema_version");
    for (const auto& g : j.at("games")) d.games.push_back(game_from_design(g));
    d.individuation = list_or<Individuation>(j, "individuation", d.individuation, [](const nlohmann::json& v) {
      return individuation_from_string(v.get<std::string>());
    });
    d.framing = list_or<Framing>(j, "framing", d.framing,
                                 [](const nlohmann::json& v) { return framing_from_string(v.get<std::string>()); });
    d.paraphrase_ids = list_or<int>(j, "paraphrase_ids", d.paraphrase_ids, [](const nlohmann::json& v) { return v.get<int>(); });
    d.budgets = list_or<double>(j, "budgets", d.budgets, [](const nlohmann::json& v) { return v.get<double>(); });
    d.stake_scales = list_or<double>(j, "stake_scales", d.stake_scales, [](const nlohmann::json& v) { return v.get<double>(); });
    d.context_lengths = list_or<std::int64_t>(j, "context_lengths", d.context_lengths,
                                              [](const nlohmann::json& v) { return v.get<std::int64_t>(); });
    d.sessions_per_cell = j.value("sessions_per_cell", d.sessions_per_cell);
    d.rounds = j.value("rounds", d.rounds);
    d.within_subject = j.value("within_subject", d.within_subject);
    d.master_seed = j.value("master_seed", d.master_seed);
    for (const auto& a : j.at("arms")) {
      DesignArm arm;
      arm.arm = arm_from_string(a.value("arm", std::string("Synthetic")));
      arm.label = a.value("label", std::string{});
      arm.agents = a.at("agents").get<std::vector<AgentConfig>>();
      if (a.contains("per_game"))
        for (const auto& [id, agents] : a.at("per_game").items())
          arm.per_game[id] = agents.get<std::vector<AgentConfig>>();
      d.arms.push_back(std::move(arm));
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("design: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const ExperimentDesign& d) {
  std::vector<std::string> ind, frames;
  for (auto i : d.individuation) ind.push_back(to_string(i));
  for (auto f : d.framing) frames.push_back(to_string(f));
  auto arms = nlohmann::json::array();
  for (const auto& a : d.arms) {
    nlohmann::json aj{{"arm", to_string(a.arm)}, {"label", a.label}, {"agents", a.agents}};
    if (!a.per_game.empty()) aj["per_game"] = a.per_game;
    arms.push_back(std::move(aj));
  }
  j = nlohmann::json{{"schema_version", 1},      {"games", d.games},
                     {"individuation", ind},      {"framing", frames},
                     {"paraphrase_ids", d.paraphrase_ids}, {"budgets", d.budgets},
                     {"stake_scales", d.stake_scales},     {"context_lengths", d.context_lengths},
                     {"sessions_per_cell", d.sessions_per_cell}, {"rounds", d.rounds},
                     {"within_subject", d.within_subject},       {"master_seed", d.master_seed},
                     {"arms", std::move(arms)}};
}

// ---- calibration -----------------------------------------------------------

double simulate_individuation_d(const GameSpec& game, const std::vector<AgentConfig>& agents,
                                const GammaCalibration& opts) {
  const auto baseline = compute_baseline(game, opts.role, agents.at(static_cast<std::size_t>(opts.role)).benchmark);
  const double base = baseline.normalized_mean(game);
  std::vector<double> named(static_cast<std::size_t>(opts.subjects)), aggregate(named.size());
  stats::parallel_for(named.size(), [&](std::size_t s) {
    SessionSpec spec;
    for (std::size_t r = 0; r < agents.size(); ++r) spec.subject_seeds.push_back(derive_seed(opts.seed, s, r, 1));
    for (auto ind : {Individuation::Named, Individuation::Aggregate}) {
      Condition c;
      c.individuation = ind;
      const auto records =
          run_session(game, agents, opts.rounds, c, derive_seed(opts.seed, s, static_cast<std::uint64_t>(ind), 2), spec);
      double sum = 0.0;
      int n = 0;
      for (const auto& rec : records)
        if (rec.role == opts.role) {
          sum += std::fabs(normalize_action(game, rec.role, rec.decision) - base);
          ++n;
        }
      (ind == Individuation::Named ? named : aggregate)[s] = sum / n;
    }
  });
  return cohens_d_paired(named, aggregate, {0, 0}).d;
}

double calibrate_individuation_gamma(const GameSpec& game, std::vector<AgentConfig> agents,
                                     const GammaCalibration& opts) {
  auto d_at = [&](double gamma) {
    for (auto& a : agents)
      if (a.kind == AgentKind::BoundedHuman) a.individuation_gamma = gamma;
    return simulate_individuation_d(game, agents, opts);
  };
  double lo = 0.0, hi = 0.5;
  if (d_at(lo) > opts.target_d) throw Error("NoConvergence", "target d is below the effect at gamma = 0");
  while (d_at(hi) < opts.target_d) {
    lo = hi;
    hi *= 2.0;
    if (hi > 64) throw Error("NoConvergence", "target d not reachable by individuation_gamma");
  }
  for (int it = 0; it < 60 && hi - lo > opts.tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    (d_at(mid) < opts.target_d ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace deltalab
