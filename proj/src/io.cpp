#include "metamdp/io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace metamdp {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where + ": missing \"" + key + "\"");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where + ": expected an integer");
  return j.get<int>();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) bad(where + ": trailing characters in '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    bad(where + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::string format_double(double x) {
  if (x == 0.0) return "0";  // folds -0
  return fmt::format("{}", x);
}

EnvConfig env_from_json(const json& j) {
  const json& nodes = require(j, "nodes", "env");
  if (!nodes.is_array()) bad("env: \"nodes\" must be an array");
  std::map<int, std::optional<int>> parent_of;
  for (const auto& n : nodes) {
    const int id = integer(require(n, "id", "env node"), "env node id");
    const json& p = require(n, "parent", "env node " + std::to_string(id));
    if (parent_of.count(id)) bad("env: duplicate node id " + std::to_string(id));
    parent_of[id] = p.is_null() ? std::nullopt
                                : std::optional<int>(integer(p, "env node parent"));
  }
  const int count = static_cast<int>(parent_of.size());
  if (count == 0 || parent_of.begin()->first != 0 || parent_of.rbegin()->first != count - 1) {
    bad("env: node ids must be 0..N-1");
  }
  std::vector<std::optional<NodeId>> parents(count);
  for (const auto& [id, p] : parent_of) parents[id] = p;

  const json& priors_j = require(j, "priors", "env");
  std::vector<Distribution> priors(count);
  for (int id = 0; id < count; ++id) {
    const std::string key = std::to_string(id);
    if (!priors_j.contains(key)) {
      if (!parents[id]) {
        priors[id] = {{0, 1.0}};  // root may be omitted
        continue;
      }
      bad("env: no prior for node " + key);
    }
    for (const auto& pair : priors_j.at(key)) {
      if (!pair.is_array() || pair.size() != 2) bad("env: prior entries are [value, prob] pairs");
      priors[id].push_back({integer(pair[0], "prior value"), number(pair[1], "prior prob")});
    }
  }
  return EnvConfig(std::move(parents), std::move(priors),
                   number(require(j, "click_cost", "env"), "env click_cost"));
}

json env_to_json(const EnvConfig& env) {
  json nodes = json::array();
  json priors = json::object();
  for (NodeId n = 0; n < env.node_count(); ++n) {
    const auto p = env.parent(n);
    nodes.push_back({{"id", n}, {"parent", p ? json(*p) : json(nullptr)}});
    json d = json::array();
    for (const auto& o : env.prior(n)) d.push_back({o.value, o.prob});
    priors[std::to_string(n)] = d;
  }
  return {{"nodes", nodes}, {"priors", priors}, {"click_cost", env.click_cost()}};
}

GroundTruth truth_from_json(const json& j, const EnvConfig& env) {
  if (!j.is_object()) bad("truth must be an object");
  GroundTruth g;
  g.realized_value.assign(env.node_count(), 0);
  for (NodeId n = 0; n < env.node_count(); ++n) {
    const std::string key = std::to_string(n);
    if (j.contains(key)) {
      g.realized_value[n] = integer(j.at(key), "truth " + key);
    } else if (n != env.root()) {
      bad("truth: missing node " + key);
    }
  }
  validate_ground_truth(env, g);
  return g;
}

json truth_to_json(const GroundTruth& g) {
  json j = json::object();
  for (std::size_t n = 0; n < g.realized_value.size(); ++n) {
    j[std::to_string(n)] = g.realized_value[n];
  }
  return j;
}

FeatureSetConfig features_from_json(const json& j, const EnvConfig& env) {
  if (j.is_null()) return FeatureSetConfig::defaults(env);
  const json& names_j = require(j, "features", "features");
  std::vector<std::string> names = names_j.get<std::vector<std::string>>();
  std::vector<double> scales;
  if (j.contains("scales")) {
    scales = j.at("scales").get<std::vector<double>>();
  } else {
    const auto defaults = FeatureSetConfig::defaults(env);
    for (const auto& name : names) {
      const Feature f = feature_from_name(name);
      scales.push_back(defaults.scales[static_cast<std::size_t>(f)]);
    }
  }
  return FeatureSetConfig::from_names(names, std::move(scales));
}

json features_to_json(const FeatureSetConfig& cfg) {
  json names = json::array();
  for (Feature f : cfg.enabled) names.push_back(std::string(feature_name(f)));
  return {{"features", names}, {"scales", cfg.scales}};
}

VariantSpec variant_from_json(const json& j) {
  if (j.is_string()) return VariantSpec::from_name(j.get<std::string>());
  VariantSpec v;
  v.pr = j.value("pr", false);
  v.se = j.value("se", false);
  v.td = j.value("td", false);
  return v;
}

json variant_to_json(const VariantSpec& v) { return {{"pr", v.pr}, {"se", v.se}, {"td", v.td}}; }

HyperParams hyperparams_from_json(const json& j, const FeatureSetConfig& features,
                                  const std::vector<double>& direction) {
  if (!j.is_object()) bad("hyperparams must be an object");
  HyperParams hp;
  hp.alpha = number(require(j, "alpha", "hyperparams"), "alpha");
  hp.gamma = number(require(j, "gamma", "hyperparams"), "gamma");
  hp.tau = number(require(j, "tau", "hyperparams"), "tau");
  if (j.contains("pr_weight")) hp.pr_weight = number(j.at("pr_weight"), "pr_weight");
  if (j.contains("se_value")) hp.se_value = number(j.at("se_value"), "se_value");
  const json& w = j.contains("w_init") ? j.at("w_init") : json(0.0);
  if (w.is_number()) {
    hp.w_init.resize(features.size());
    for (std::size_t i = 0; i < hp.w_init.size(); ++i) hp.w_init[i] = w.get<double>() * direction.at(i);
  } else {
    hp.w_init = w.get<std::vector<double>>();
  }
  validate(hp, features.size());
  return hp;
}

json hyperparams_to_json(const HyperParams& hp) {
  return {{"alpha", hp.alpha},         {"gamma", hp.gamma},       {"tau", hp.tau},
          {"pr_weight", hp.pr_weight}, {"se_value", hp.se_value}, {"w_init", hp.w_init}};
}

ParticipantData participant_from_json(const json& j, const EnvConfig& env) {
  ParticipantData p;
  const json& id = require(j, "id", "participant");
  p.id = id.is_string() ? id.get<std::string>() : id.dump();
  for (const auto& t : require(j, "trials", "participant " + p.id)) {
    ParticipantTrial trial;
    trial.truth = truth_from_json(require(t, "truth", "trial"), env);
    trial.clicks = require(t, "clicks", "trial").get<std::vector<NodeId>>();
    trial.terminated = t.value("terminated", true);
    p.trials.push_back(std::move(trial));
  }
  return p;
}

json participant_to_json(const ParticipantData& p) {
  json trials = json::array();
  for (const auto& t : p.trials) {
    trials.push_back(
        {{"truth", truth_to_json(t.truth)}, {"clicks", t.clicks}, {"terminated", t.terminated}});
  }
  return {{"id", p.id}, {"trials", trials}};
}

json trial_record_to_json(const TrialRecord& r) {
  return {{"agent", r.agent},
          {"trial", r.trial},
          {"clicks", r.clicks},
          {"score", r.external_score},
          {"label", std::string(to_string(r.label))},
          {"truth", truth_to_json(r.truth)},
          {"decision_probs", r.decision_probs}};
}

TrialRecord trial_record_from_json(const json& j, const EnvConfig& env) {
  TrialRecord r;
  r.agent = integer(require(j, "agent", "record"), "agent");
  r.trial = integer(require(j, "trial", "record"), "trial");
  r.clicks = require(j, "clicks", "record").get<std::vector<NodeId>>();
  r.external_score = number(require(j, "score", "record"), "score");
  r.label = strategy_label_from_string(require(j, "label", "record").get<std::string>());
  r.truth = truth_from_json(require(j, "truth", "record"), env);
  if (j.contains("decision_probs")) r.decision_probs = j.at("decision_probs").get<std::vector<double>>();
  return r;
}

std::vector<ParticipantData> participants_from_records(std::span<const TrialRecord> records) {
  std::map<int, ParticipantData> by_agent;
  for (const auto& r : records) {
    auto& p = by_agent[r.agent];
    p.id = std::to_string(r.agent);
    p.trials.push_back({r.truth, r.clicks, true});
  }
  std::vector<ParticipantData> out;
  for (auto& [agent, p] : by_agent) out.push_back(std::move(p));
  return out;
}

std::string fit_csv_row(const std::string& id, const FitResult& fit) {
  const auto& hp = fit.hp_best;
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", id, fit.variant.name(),
                     format_double(hp.alpha), format_double(hp.gamma), format_double(hp.tau),
                     format_double(fit.variant.pr ? hp.pr_weight : 0.0),
                     format_double(fit.variant.se ? hp.se_value : 0.0),
                     format_double(fit.log_likelihood), format_double(fit.bic), fit.n_obs);
}

std::vector<FitRow> parse_fit_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kFitCsvHeader) {
    bad("fit table: header must be '" + std::string(kFitCsvHeader) + "'");
  }
  std::vector<FitRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    const std::string where = "fit table line " + std::to_string(lineno);
    if (cells.size() != 10) bad(where + ": expected 10 columns");
    FitRow r;
    r.id = cells[0];
    r.variant = VariantSpec::from_name(cells[1]);
    r.alpha = parse_double(cells[2], where);
    r.gamma = parse_double(cells[3], where);
    r.tau = parse_double(cells[4], where);
    r.pr_weight = parse_double(cells[5], where);
    r.se_value = parse_double(cells[6], where);
    r.ll = parse_double(cells[7], where);
    r.bic = parse_double(cells[8], where);
    r.n_obs = static_cast<int>(parse_double(cells[9], where));
    rows.push_back(std::move(r));
  }
  return rows;
}

FamilyMap default_family_map() {
  auto with = [](auto pred) {
    std::vector<std::string> in, out;
    for (const auto& v : VariantSpec::all()) (pred(v) ? in : out).push_back(v.name());
    return std::make_pair(in, out);
  };
  const auto [pr, no_pr] = with([](const VariantSpec& v) { return v.pr; });
  const auto [td, no_td] = with([](const VariantSpec& v) { return v.td; });
  const auto [se, no_se] = with([](const VariantSpec& v) { return v.se; });
  return {
      {"pr", {{"PR", pr}, {"No PR", no_pr}}},
      {"td", {{"TD", td}, {"No TD", no_td}}},
      {"se", {{"SE", se}, {"No SE", no_se}}},
  };
}

FamilyMap family_map_from_json(const json& j) {
  // {"<partition>": {"<family>": [variant names]}}; nlohmann objects iterate in key order.
  if (!j.is_object() || j.empty()) bad("family map must be a non-empty object");
  FamilyMap map;
  for (const auto& [partition, fams] : j.items()) {
    std::vector<std::pair<std::string, std::vector<std::string>>> families;
    std::set<std::string> seen;
    for (const auto& [family, members] : fams.items()) {
      auto names = members.get<std::vector<std::string>>();
      for (const auto& n : names) {
        VariantSpec::from_name(n);
        if (!seen.insert(n).second) bad("family map: variant '" + n + "' listed twice in " + partition);
      }
      families.emplace_back(family, std::move(names));
    }
    if (families.size() < 2) bad("family map: partition '" + partition + "' needs two families");
    map.emplace_back(partition, std::move(families));
  }
  return map;
}

EvidenceMatrix evidence_from_fits(
    const std::vector<FitRow>& rows,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& families,
    std::vector<std::string>* participant_ids) {
  EvidenceMatrix e;
  for (std::size_t f = 0; f < families.size(); ++f) {
    e.families.push_back(families[f].first);
    for (const auto& m : families[f].second) {
      e.models.push_back(m);
      e.family_of.push_back(static_cast<int>(f));
    }
  }
  std::vector<std::string> ids;
  std::map<std::string, std::map<std::string, double>> bic;
  for (const auto& r : rows) {
    if (!bic.count(r.id)) ids.push_back(r.id);
    bic[r.id][r.variant.name()] = r.bic;
  }
  std::string missing;
  for (const auto& id : ids) {
    std::vector<double> row;
    for (const auto& m : e.models) {
      const auto it = bic[id].find(m);
      if (it == bic[id].end()) {
        missing += (missing.empty() ? "" : ", ") + ("(" + id + ", " + m + ")");
        continue;
      }
      row.push_back(-it->second / 2.0);
    }
    e.log_evidence.push_back(std::move(row));
  }
  if (!missing.empty()) throw Error(ErrorCode::kMissingFit, "missing fits: " + missing);
  if (ids.empty()) throw Error(ErrorCode::kMissingFit, "fit table has no rows");
  if (participant_ids) *participant_ids = ids;
  return e;
}

json bms_result_to_json(const BmsResult& r, const EvidenceMatrix& e) {
  json alpha = json::object(), r_j = json::object(), phi = json::object();
  for (std::size_t k = 0; k < e.models.size(); ++k) alpha[e.models[k]] = r.alpha[k];
  for (std::size_t f = 0; f < e.families.size(); ++f) {
    r_j[e.families[f]] = r.r[f];
    phi[e.families[f]] = r.phi[f];
  }
  return {{"alpha", alpha}, {"r", r_j}, {"phi", phi}, {"converged", r.converged},
          {"iterations", r.iterations}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace metamdp
