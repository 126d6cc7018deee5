#include "deltalab/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "deltalab/error.hpp"
#include "deltalab/rng.hpp"

namespace deltalab {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits CSV text into records of fields (RFC 4180 quoting). Each record
// keeps the 1-based line number it starts on.
struct CsvRecord {
  int line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRecord> split_csv(const std::string& text, std::vector<std::string>& comments) {
  std::vector<CsvRecord> out;
  std::size_t i = 0;
  int line = 1;
  while (i < text.size()) {
    if (text[i] == '#') {
      const auto end = text.find('\n', i);
      comments.push_back(text.substr(i + 1, (end == std::string::npos ? text.size() : end) - i - 1));
      i = end == std::string::npos ? text.size() : end + 1;
      ++line;
      continue;
    }
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool quoted = false;
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++i;
        break;
      } else {
        field += c;
      }
    }
    rec.fields.push_back(std::move(field));
    ++line;
    if (!(rec.fields.size() == 1 && rec.fields[0].empty())) out.push_back(std::move(rec));
  }
  return out;
}

struct RowError {
  std::string name;
  std::string detail;
};

double parse_double(const std::string& s, bool& ok) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  ok = r.ec == std::errc() && r.ptr == end && !s.empty();
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, bool& ok) {
  Int v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  ok = r.ec == std::errc() && r.ptr == end && !s.empty();
  return v;
}

Decision parse_decision_field(const GameSpec& g, int role, const std::string& s, bool& ok) {
  const auto& space = g.action_space(role);
  if (const auto* interval = std::get_if<ContinuousInterval>(&space)) {
    const double v = parse_double(s, ok);
    ok = ok && v >= interval->lo && v <= interval->hi;
    return v;
  }
  const auto& labels = std::get<DiscreteSet>(space).labels;
  ok = std::find(labels.begin(), labels.end(), s) != labels.end();
  return s;
}

}  // namespace

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols{"session_id",   "subject_id",   "game_id",        "role",
                                             "round",        "individuation", "framing",       "paraphrase_id",
                                             "stake_scale",  "compute_budget", "context_length", "decision",
                                             "opponent_decision", "arm"};
  return cols;
}

GameRegistry load_game_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot read " + path.string());
  GameRegistry out;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& games = j.is_array() ? j : j.at("games");
    for (const auto& g : games) {
      auto spec = g.get<GameSpec>();
      out[spec.id] = std::move(spec);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", path.string() + ": " + e.what());
  }
  return out;
}

GameRegistry bundled_games() {
  const std::filesystem::path path = std::filesystem::path(DELTALAB_DATA_DIR) / "games.json";
  if (!std::filesystem::exists(path)) return {};
  return load_game_registry(path);
}

void write_game_registry(const std::filesystem::path& path, const GameRegistry& games) {
  auto arr = nlohmann::json::array();
  for (const auto& [id, g] : games) arr.push_back(g);
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write " + path.string());
  out << nlohmann::json{{"schema_version", 1}, {"games", arr}}.dump(2) << '\n';
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".games.json");
}

Dataset parse_dataset(const std::string& csv_text, const GameRegistry& games, bool lenient) {
  std::vector<std::string> comments;
  const auto records = split_csv(csv_text, comments);
  Dataset d;
  d.generator.clear();
  for (const auto& c : comments) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    auto key = c.substr(0, eq);
    const auto value = c.substr(eq + 1);
    key.erase(0, key.find_first_not_of(' '));
    if (key == "schema_version") {
      bool ok = false;
      d.schema_version = parse_int<int>(value, ok);
      if (!ok || d.schema_version != kDatasetSchemaVersion)
        throw Error("ParseError", "unsupported dataset schema_version '" + value + "'");
    } else if (key == "generator") {
      d.generator = value;
    } else if (key == "master_seed") {
      bool ok = false;
      d.master_seed = parse_int<std::uint64_t>(value, ok);
      if (!ok) throw Error("ParseError", "bad master_seed '" + value + "'");
    }
  }
  if (records.empty()) throw Error("MissingColumn", "no header row");
  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  for (const auto& col : dataset_columns())
    if (!index.count(col)) throw Error("MissingColumn", col);

  std::vector<std::pair<int, RowError>> errors;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto fail = [&](const std::string& name, const std::string& detail) { errors.push_back({rec.line, {name, detail}}); };
    if (rec.fields.size() != header.size()) {
      fail("TypeError", fmt::format("line {}: expected {} fields, got {}", rec.line, header.size(), rec.fields.size()));
      continue;
    }
    auto f = [&](const char* col) -> const std::string& { return rec.fields[index.at(col)]; };
    RoundRecord row;
    row.session_id = f("session_id");
    row.subject_id = f("subject_id");
    row.game_id = f("game_id");
    const auto game_it = games.find(row.game_id);
    if (game_it == games.end()) {
      fail("UnknownGame", fmt::format("line {}: game '{}'", rec.line, row.game_id));
      continue;
    }
    const auto& game = game_it->second;
    bool ok = true;
    std::string bad;
    auto check = [&](bool good, const char* col) {
      if (!good && ok) {
        ok = false;
        bad = col;
      }
    };
    bool good = false;
    row.role = parse_int<int>(f("role"), good);
    check(good && row.role >= 0 && row.role < static_cast<int>(game.action_spaces.size()), "role");
    row.round = parse_int<int>(f("round"), good);
    check(good && row.round >= 1, "round");
    try {
      row.condition.individuation = individuation_from_string(f("individuation"));
    } catch (const Error&) {
      check(false, "individuation");
    }
    try {
      row.condition.framing = framing_from_string(f("framing"));
    } catch (const Error&) {
      check(false, "framing");
    }
    row.condition.paraphrase_id = parse_int<int>(f("paraphrase_id"), good);
    check(good, "paraphrase_id");
    row.condition.stake_scale = parse_double(f("stake_scale"), good);
    check(good, "stake_scale");
    row.condition.compute_budget = parse_double(f("compute_budget"), good);
    check(good, "compute_budget");
    row.condition.context_length = parse_int<std::int64_t>(f("context_length"), good);
    check(good, "context_length");
    try {
      row.arm = arm_from_string(f("arm"));
    } catch (const Error&) {
      check(false, "arm");
    }
    if (ok) {
      row.decision = parse_decision_field(game, row.role, f("decision"), good);
      check(good, "decision");
      if (ok && !f("opponent_decision").empty()) {
        const int opp_role = game.action_spaces.size() == 2 ? 1 - row.role : row.role;
        row.opponent_decision = parse_decision_field(game, opp_role, f("opponent_decision"), good);
        check(good, "opponent_decision");
      }
    }
    if (!ok) {
      fail("TypeError", fmt::format("line {}, column {}: '{}'", rec.line, bad, rec.fields[index.at(bad)]));
      continue;
    }
    d.games.emplace(game.id, game);
    d.rows.push_back(std::move(row));
  }
  if (!errors.empty()) {
    if (!lenient) {
      std::string report;
      for (const auto& [line, e] : errors) report += (report.empty() ? "" : "; ") + e.detail;
      throw Error(errors.front().second.name, fmt::format("{} bad row(s): {}", errors.size(), report));
    }
    d.dropped_rows = static_cast<int>(errors.size());
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IOError", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto games = bundled_games();
  if (std::filesystem::exists(sidecar_path(path)))
    for (auto& [id, g] : load_game_registry(sidecar_path(path))) games[id] = std::move(g);
  for (const auto& [id, g] : opts.extra_games) games[id] = g;
  return parse_dataset(buf.str(), games, opts.lenient);
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "# schema_version=" << d.schema_version << '\n';
  if (!d.generator.empty()) out << "# generator=" << d.generator << '\n';
  if (d.master_seed) out << "# master_seed=" << *d.master_seed << '\n';
  const auto& cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : d.rows) {
    const auto& c = r.condition;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", quote(r.session_id), quote(r.subject_id),
                       quote(r.game_id), r.role, r.round, to_string(c.individuation), to_string(c.framing),
                       c.paraphrase_id, c.stake_scale, c.compute_budget, c.context_length,
                       quote(decision_to_string(r.decision)),
                       r.opponent_decision ? quote(decision_to_string(*r.opponent_decision)) : std::string(),
                       to_string(r.arm));
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IOError", "cannot write " + path.string());
  write_dataset_csv(out, d);
  if (!d.games.empty()) write_game_registry(sidecar_path(path), d.games);
}

std::string dataset_hash(const Dataset& d) {
  std::ostringstream s;
  write_dataset_csv(s, d);
  return fmt::format("fnv1a64:{:016x}", fnv1a64(s.str()));
}

}  // namespace deltalab
