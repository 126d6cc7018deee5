#include "deltalab/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab {

namespace {

using GroupKey = std::tuple<std::string, std::string, std::string, int>;  // session, subject, game, role

bool unit_scale(const GameSpec& g, int role) {
  const auto& s = g.action_space(role);
  if (std::holds_alternative<ContinuousInterval>(s)) return true;
  return std::get<DiscreteSet>(s).labels.size() == 2;
}

bool role_selected(const AnalysisOptions& opts, int role) {
  return opts.roles.empty() || std::find(opts.roles.begin(), opts.roles.end(), role) != opts.roles.end();
}

const GameSpec& game_of(const Dataset& d, const std::string& id) {
  const auto it = d.games.find(id);
  if (it == d.games.end()) throw Error("UnknownGame", id);
  return it->second;
}

// Rows grouped by subject-session-role, each group sorted by round.
std::map<GroupKey, std::vector<const RoundRecord*>> grouped_rows(const Dataset& d, const AnalysisOptions& opts) {
  std::map<GroupKey, std::vector<const RoundRecord*>> groups;
  for (const auto& r : d.rows) {
    if (!role_selected(opts, r.role) || !unit_scale(game_of(d, r.game_id), r.role)) continue;
    groups[{r.session_id, r.subject_id, r.game_id, r.role}].push_back(&r);
  }
  for (auto& [k, rows] : groups)
    std::stable_sort(rows.begin(), rows.end(), [](const RoundRecord* a, const RoundRecord* b) { return a->round < b->round; });
  return groups;
}

class BaselineCache {
 public:
  BaselineCache(const Dataset& d, Benchmark b) : data_(d), benchmark_(b) {}
  const Baseline& get(const std::string& game_id, int role) {
    const auto key = std::make_pair(game_id, role);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, compute_baseline(game_of(data_, game_id), role, benchmark_)).first;
    return it->second;
  }

 private:
  const Dataset& data_;
  Benchmark benchmark_;
  std::map<std::pair<std::string, int>, Baseline> cache_;
};

template <typename T, typename F>
std::set<T> distinct(const std::vector<DeltaObservation>& obs, F get) {
  std::set<T> out;
  for (const auto& o : obs) out.insert(get(o));
  return out;
}

}  // namespace

std::vector<DeltaObservation> dataset_deltas(const Dataset& data, const AnalysisOptions& opts) {
  BaselineCache baselines(data, opts.benchmark);
  std::vector<DeltaObservation> out;
  for (const auto& [key, rows] : grouped_rows(data, opts)) {
    const auto& first = *rows.front();
    const auto& game = game_of(data, first.game_id);
    const auto& baseline = baselines.get(first.game_id, first.role);
    const DeltaKey dk{first.session_id, first.subject_id, first.game_id, first.role, first.condition};
    if (game.is_continuous(first.role)) {
      for (const auto* r : rows) out.push_back({dk, game.family, r->round, compute_delta(game, *r, baseline)});
    } else {
      std::vector<RoundRecord> copy;
      copy.reserve(rows.size());
      for (const auto* r : rows) copy.push_back(*r);
      for (const auto& p : block_delta_discrete(game, copy, baseline, opts.block_size).values)
        out.push_back({dk, game.family, p.index, p.value});
    }
  }
  return out;
}

std::vector<PathSeries> dataset_path_series(const Dataset& data, const AnalysisOptions& opts) {
  std::vector<PathSeries> out;
  for (const auto& [key, rows] : grouped_rows(data, opts)) {
    const auto& first = *rows.front();
    const auto& game = game_of(data, first.game_id);
    const int opp_role = game.action_spaces.size() == 2 ? 1 - first.role : first.role;
    PathSeries s;
    s.id = fmt::format("{}/{}/r{}", first.session_id, first.subject_id, first.role);
    bool opponent_complete = unit_scale(game, opp_role);
    for (const auto* r : rows) {
      s.own.push_back(normalize_action(game, r->role, r->decision));
      if (opponent_complete && r->opponent_decision)
        s.opponent.push_back(normalize_action(game, opp_role, *r->opponent_decision));
      else
        opponent_complete = false;
    }
    if (!opponent_complete) s.opponent.clear();
    out.push_back(std::move(s));
  }
  return out;
}

SignatureProfile analyze_dataset(const Dataset& data, const AnalysisOptions& opts) {
  const auto obs = dataset_deltas(data, opts);
  if (obs.empty()) throw Error("TooFewObservations", "no residuals could be computed from the dataset");
  std::vector<double> deltas;
  deltas.reserve(obs.size());
  for (const auto& o : obs) deltas.push_back(o.delta);

  SignatureProfile profile;
  auto with_seed = [&](std::uint64_t stream) {
    auto t = opts.tests;
    t.seed = derive_seed(opts.tests.seed, stream);
    return t;
  };

  // Conditional dependence on the environment features that vary.
  std::vector<Feature> features;
  if (distinct<int>(obs, [](const auto& o) { return static_cast<int>(o.key.condition.individuation); }).size() > 1) {
    Feature f{"individuation", {}, {}};
    for (const auto& o : obs) f.levels.push_back(to_string(o.key.condition.individuation));
    features.push_back(std::move(f));
  }
  if (distinct<int>(obs, [](const auto& o) { return static_cast<int>(o.key.condition.framing); }).size() > 1) {
    Feature f{"framing", {}, {}};
    for (const auto& o : obs) f.levels.push_back(to_string(o.key.condition.framing));
    features.push_back(std::move(f));
  }
  if (distinct<int>(obs, [](const auto& o) { return static_cast<int>(o.family); }).size() > 1) {
    Feature f{"family", {}, {}};
    for (const auto& o : obs) f.levels.push_back(to_string(o.family));
    features.push_back(std::move(f));
  }
  if (distinct<double>(obs, [](const auto& o) { return o.key.condition.stake_scale; }).size() > 1) {
    Feature f{"stake_scale", {}, {}};
    for (const auto& o : obs) f.numeric.push_back(o.key.condition.stake_scale);
    features.push_back(std::move(f));
  }
  if (features.empty())
    throw Error("InsufficientFeatures", "none of individuation, framing, family or stake varies in the dataset");
  profile.conditional_dependence = test_conditional_dependence(deltas, features, with_seed(1));

  // Asymmetry: each framed subset against its predicted direction.
  std::map<Framing, std::vector<double>> by_frame;
  for (const auto& o : obs)
    if (o.key.condition.framing != Framing::Neutral) by_frame[o.key.condition.framing].push_back(o.delta);
  if (by_frame.empty()) {
    profile.asymmetry = test_distributional_asymmetry(deltas, opts.neutral_direction, with_seed(2));
  } else {
    SignatureResult combined;
    combined.test = "distributional_asymmetry";
    combined.flagged = true;
    std::string predicted, observed;
    double weakest = std::numeric_limits<double>::infinity();
    std::uint64_t stream = 20;
    for (const auto& [frame, values] : by_frame) {
      const auto dir = *predicted_direction(frame);
      const auto r = test_distributional_asymmetry(values, dir, with_seed(stream++));
      combined.flagged = combined.flagged && r.flagged;
      combined.n += r.n;
      combined.details["skew:" + to_string(frame)] = r.statistic;
      if (r.p_value) combined.details["p:" + to_string(frame)] = *r.p_value;
      predicted += (predicted.empty() ? "" : ",") + to_string(frame) + ":" + to_string(dir);
      observed += (observed.empty() ? "" : ",") + to_string(frame) + ":" + r.direction_observed.value_or("None");
      // The subset with the least evidence for its predicted direction carries the result.
      const double toward = dir == Direction::Left ? -r.statistic : r.statistic;
      if (toward < weakest) {
        weakest = toward;
        combined.statistic = r.statistic;
        combined.effect = r.effect;
        combined.ci95 = r.ci95;
        combined.p_value = r.p_value;
      }
    }
    combined.direction_predicted = predicted;
    combined.direction_observed = observed;
    profile.asymmetry = combined;
  }

  profile.path_dependence = test_path_dependence(dataset_path_series(data, opts), opts.path, with_seed(3));

  std::map<int, std::vector<double>> by_paraphrase;
  for (const auto& o : obs) by_paraphrase[o.key.condition.paraphrase_id].push_back(o.delta);
  std::vector<std::vector<double>> groups;
  for (auto& [id, values] : by_paraphrase) groups.push_back(std::move(values));
  profile.paraphrase = test_paraphrase_robustness(groups, with_seed(4));

  if (opts.llm_covariates) {
    const auto budgets = distinct<double>(obs, [](const auto& o) { return o.key.condition.compute_budget; });
    const auto frames = distinct<int>(obs, [](const auto& o) { return static_cast<int>(o.key.condition.framing); });
    if (budgets.size() >= 3 && frames.size() >= 2) {
      std::vector<Condition> conditions;
      for (const auto& o : obs) conditions.push_back(o.key.condition);
      profile.llm_covariates = test_llm_covariates(deltas, conditions, with_seed(5));
    }
  }
  return classify_profile(std::move(profile));
}

std::vector<ModeratorObservation> moderator_observations(const Dataset& data, const AnalysisOptions& opts) {
  auto o = opts;
  o.roles = {opts.moderator_role};
  std::vector<ModeratorObservation> out;
  for (const auto& d : dataset_deltas(data, o))
    out.push_back({d.key.game_id, d.key.subject_id, d.key.condition.individuation, std::fabs(d.delta)});
  return out;
}

GradientReport moderator_report(const Dataset& data, const AnalysisOptions& opts) {
  return individuation_gradient_test(moderator_observations(data, opts), opts.gradient);
}

void write_delta_observations_csv(std::ostream& out, const std::vector<DeltaObservation>& obs) {
  out << "session_id,subject_id,game_id,family,role,index,individuation,framing,paraphrase_id,stake_scale,"
         "compute_budget,context_length,delta\n";
  for (const auto& o : obs) {
    const auto& c = o.key.condition;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", o.key.session_id, o.key.subject_id, o.key.game_id,
                       to_string(o.family), o.key.role, o.index, to_string(c.individuation), to_string(c.framing),
                       c.paraphrase_id, c.stake_scale, c.compute_budget, c.context_length, o.delta);
  }
}

AnalysisOptions analysis_options_from_json(const nlohmann::json& j, AnalysisOptions o) {
  try {
    o.tests.permutations = j.value("permutations", o.tests.permutations);
    o.tests.bootstrap = j.value("bootstrap", o.tests.bootstrap);
    o.tests.power_replicates = j.value("power_replicates", o.tests.power_replicates);
    o.tests.seed = j.value("seed", o.tests.seed);
    o.tests.alpha = j.value("alpha", o.tests.alpha);
    o.path.lag_order = j.value("lag_order", o.path.lag_order);
    o.path.min_rounds = j.value("min_rounds", o.path.min_rounds);
    o.path.min_sessions = j.value("min_sessions", o.path.min_sessions);
    o.path.bias_permutations = j.value("bias_permutations", o.path.bias_permutations);
    o.block_size = j.value("block_size", o.block_size);
    if (j.contains("roles")) o.roles = j.at("roles").get<std::vector<int>>();
    if (j.contains("neutral_direction"))
      o.neutral_direction = j.at("neutral_direction").get<std::string>() == "Right" ? Direction::Right : Direction::Left;
    o.llm_covariates = j.value("llm_covariates", o.llm_covariates);
    o.moderator_role = j.value("moderator_role", o.moderator_role);
    o.gradient.bootstrap = j.value("bootstrap", o.gradient.bootstrap);
    o.gradient.seed = j.value("seed", o.gradient.seed);
    o.gradient.min_games = j.value("min_games", o.gradient.min_games);
    if (j.contains("ordering")) o.gradient.ordering = j.at("ordering").get<std::vector<std::string>>();
    if (j.contains("benchmark")) {
      const auto& b = j.at("benchmark");
      const auto kind = b.is_string() ? b.get<std::string>() : b.at("kind").get<std::string>();
      const int k = b.is_object() ? b.value("k", 1) : 1;
      if (kind == "nash") o.benchmark = Benchmark::nash();
      else if (kind == "spe") o.benchmark = Benchmark::spe();
      else if (kind == "level-k") o.benchmark = Benchmark::level_k(k);
      else if (kind == "ch") o.benchmark = Benchmark::cognitive_hierarchy(k, b.is_object() ? b.value("tau", 1.5) : 1.5);
      else if (kind == "qre") o.benchmark = Benchmark::logit_qre(b.is_object() ? b.value("lambda", 1.0) : 1.0);
      else throw Error("InvalidParams", "unknown benchmark '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("analysis config: ") + e.what());
  }
  return o;
}

namespace {

// Same shape analysis_options_from_json accepts.
nlohmann::json benchmark_json(const Benchmark& b) {
  switch (b.kind) {
    case Benchmark::Kind::Nash: return "nash";
    case Benchmark::Kind::SPE: return "spe";
    case Benchmark::Kind::LevelK: return {{"kind", "level-k"}, {"k", b.k}};
    case Benchmark::Kind::CognitiveHierarchy: return {{"kind", "ch"}, {"k", b.k}, {"tau", b.tau}};
    case Benchmark::Kind::LogitQRE: return {{"kind", "qre"}, {"lambda", b.lambda}};
  }
  return "nash";
}

}  // namespace

nlohmann::json analysis_options_json(const AnalysisOptions& o) {
  return nlohmann::json{{"permutations", o.tests.permutations},
                        {"bootstrap", o.tests.bootstrap},
                        {"power_replicates", o.tests.power_replicates},
                        {"seed", o.tests.seed},
                        {"alpha", o.tests.alpha},
                        {"lag_order", o.path.lag_order},
                        {"min_rounds", o.path.min_rounds},
                        {"min_sessions", o.path.min_sessions},
                        {"bias_permutations", o.path.bias_permutations},
                        {"block_size", o.block_size},
                        {"roles", o.roles},
                        {"neutral_direction", to_string(o.neutral_direction)},
                        {"llm_covariates", o.llm_covariates},
                        {"moderator_role", o.moderator_role},
                        {"min_games", o.gradient.min_games},
                        {"ordering", o.gradient.ordering},
                        {"benchmark", benchmark_json(o.benchmark)}};
}

}  // namespace deltalab
