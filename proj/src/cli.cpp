#include "metamdp/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "metamdp/analysis.hpp"
#include "metamdp/io.hpp"
#include "metamdp/parallel.hpp"
#include "metamdp/simulate.hpp"

namespace metamdp {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(section + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad(section + ": unknown key \"" + key + "\"");
  }
}

RewardForm reward_form_from(const std::string& s) {
  if (s == "immediate") return RewardForm::kImmediate;
  if (s == "return_to_go") return RewardForm::kReturnToGo;
  bad("reward_form must be \"immediate\" or \"return_to_go\"");
}

ParamBound bound_from(const json& j, ParamBound b) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    bad("fit.bounds." + b.name + " must be [lo, hi]");
  }
  b.lo = j[0].get<double>();
  b.hi = j[1].get<double>();
  if (!(b.lo <= b.hi) || (b.log_scale && b.lo <= 0.0)) bad("fit.bounds." + b.name + " is empty or invalid");
  return b;
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(where + ": wrong type");
  }
}

void setup_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("metamdp");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
  });
  const char* level = std::getenv("METAMDP_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

std::string lines_of(const std::vector<json>& items) {
  std::string out;
  for (const auto& j : items) {
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<std::pair<int, json>> read_jsonl(const fs::path& path, std::vector<std::string>* errors) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<int, json>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.emplace_back(lineno, json::parse(line));
    } catch (const json::parse_error& e) {
      const std::string msg = fmt::format("{}:{}: malformed JSON: {}", path.string(), lineno, e.what());
      if (!errors) bad(msg);
      errors->push_back(msg);
    }
  }
  return out;
}

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::string families;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<int> budget;
};

ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (flags.budget) {
    if (*flags.budget < 1) bad("--budget must be >= 1");
    cfg.fit.budget = *flags.budget;
  }
  cfg.bms.options.jobs = flags.jobs;
  return cfg;
}

// ---- simulate -------------------------------------------------------------

std::string discovery_csv(const std::vector<CurvePoint>& curve) {
  std::string s = "trial,prop_adaptive,ci_lo,ci_hi\n";
  for (const auto& c : curve) {
    s += fmt::format("{},{},{},{}\n", c.trial, format_double(c.proportion),
                     format_double(c.ci_lo), format_double(c.ci_hi));
  }
  return s;
}

int cmd_simulate(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  if (!cfg.cohort) bad(cfg.source.string() + ": simulate needs a \"cohort\" section");
  CohortConfig cohort;
  cohort.n_agents = cfg.cohort->n_agents;
  cohort.n_trials = cfg.cohort->n_trials;
  cohort.seed = cfg.seed;
  cohort.env = cfg.env;
  cohort.learner = LearnerConfig{cfg.features, cfg.cohort->variant, cfg.cohort->hp,
                                 cfg.cohort->reward_form, cfg.cohort->max_ops};
  cohort.jobs = flags.jobs;
  spdlog::info("simulating {} agents x {} trials ({})", cohort.n_agents, cohort.n_trials,
               cohort.learner.spec.name());
  const auto records = simulate_cohort(cohort);

  std::vector<json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(trial_record_to_json(r));
  std::vector<json> participants;
  for (const auto& p : participants_from_records(records)) participants.push_back(participant_to_json(p));

  write_file_atomic(cfg.out_dir / "records.jsonl", lines_of(lines));
  write_file_atomic(cfg.out_dir / "participants.jsonl", lines_of(participants));
  write_file_atomic(cfg.out_dir / "discovery.csv", discovery_csv(discovery_curve(records)));
  spdlog::info("wrote {} records to {}", records.size(), cfg.out_dir.string());
  return kExitOk;
}

// ---- fit ------------------------------------------------------------------

int cmd_fit(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const fs::path data = flags.data.empty() ? cfg.out_dir / "participants.jsonl" : fs::path(flags.data);
  if (!fs::exists(data)) throw Error(ErrorCode::kIo, "data file not found: " + data.string());

  std::vector<std::string> errors;
  std::vector<ParticipantData> participants;
  std::vector<ParticipantReplay> replays;
  for (const auto& [lineno, j] : read_jsonl(data, &errors)) {
    try {
      ParticipantData p = participant_from_json(j, *cfg.env);
      replays.push_back(build_replay(p, cfg.env, cfg.features, cfg.cohort ? cfg.cohort->max_ops : 0));
      participants.push_back(std::move(p));
    } catch (const Error& e) {
      errors.push_back(fmt::format("{}:{}: {}", data.string(), lineno, e.what()));
    } catch (const json::exception& e) {
      errors.push_back(fmt::format("{}:{}: {}", data.string(), lineno, e.what()));
    }
  }
  for (const auto& e : errors) spdlog::error("skipping participant: {}", e);

  const auto variants = VariantSpec::all();
  const std::size_t jobs_total = participants.size() * variants.size();
  std::vector<std::optional<FitResult>> fits(jobs_total);
  std::vector<std::string> fit_errors(jobs_total);
  spdlog::info("fitting {} participants x 8 variants, budget {}", participants.size(), cfg.fit.budget);
  parallel_for(jobs_total, flags.jobs, [&](std::size_t i) {
    const std::size_t p = i / variants.size();
    const std::size_t v = i % variants.size();
    FitOptions opts = cfg.fit;
    opts.seed = fit_seed(cfg.seed, static_cast<int>(p), static_cast<int>(v));
    try {
      fits[i] = optimize_hyperparams(replays[p], variants[v], cfg.features.size(), opts);
    } catch (const Error& e) {
      fit_errors[i] = e.what();
    }
  });

  std::string csv = std::string(kFitCsvHeader) + "\n";
  json full = json::array();
  bool failed = !errors.empty();
  for (std::size_t i = 0; i < jobs_total; ++i) {
    const auto& id = participants[i / variants.size()].id;
    if (!fits[i]) {
      spdlog::error("fit failed for participant {}, variant {}: {}", id,
                    variants[i % variants.size()].name(), fit_errors[i]);
      failed = true;
      continue;
    }
    csv += fit_csv_row(id, *fits[i]) + "\n";
    full.push_back({{"id", id},
                    {"variant", fits[i]->variant.name()},
                    {"hyperparams", hyperparams_to_json(fits[i]->hp_best)},
                    {"log_likelihood", fits[i]->log_likelihood},
                    {"bic", fits[i]->bic},
                    {"k", fits[i]->k},
                    {"n_obs", fits[i]->n_obs},
                    {"iterations_used", fits[i]->iterations_used}});
  }
  write_file_atomic(cfg.out_dir / "fits.csv", csv);
  write_file_atomic(cfg.out_dir / "fits.json", full.dump(2) + "\n");
  return failed ? kExitFailure : kExitOk;
}

// ---- bms ------------------------------------------------------------------

FamilyMap load_families(const CommonFlags& flags, const ExperimentConfig& cfg) {
  if (!flags.families.empty()) return family_map_from_json(json::parse(read_file(flags.families)));
  if (cfg.bms.families_file) return family_map_from_json(json::parse(read_file(*cfg.bms.families_file)));
  return default_family_map();
}

json run_bms(const std::vector<FitRow>& rows, const FamilyMap& families, const ExperimentConfig& cfg) {
  json out = json::object();
  for (std::size_t i = 0; i < families.size(); ++i) {
    const auto& [partition, fams] = families[i];
    const EvidenceMatrix e = evidence_from_fits(rows, fams);
    BmsOptions opts = cfg.bms.options;
    opts.seed = derive_seed(cfg.seed, 1000 + i);
    const BmsResult r = random_effects_bms(e, family_prior(e, cfg.bms.prior_scale), opts);
    out[partition] = bms_result_to_json(r, e);
  }
  return out;
}

int cmd_bms(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const fs::path data = flags.data.empty() ? cfg.out_dir / "fits.csv" : fs::path(flags.data);
  if (!fs::exists(data)) throw Error(ErrorCode::kIo, "fit table not found: " + data.string());
  const auto rows = parse_fit_csv(read_file(data));
  const json out = run_bms(rows, load_families(flags, cfg), cfg);
  write_file_atomic(cfg.out_dir / "bms.json", out.dump(2) + "\n");
  return kExitOk;
}

// ---- analyze / report -----------------------------------------------------

std::vector<TrialRecord> load_records(const fs::path& path, const EnvConfig& env) {
  std::vector<TrialRecord> records;
  for (const auto& [lineno, j] : read_jsonl(path, nullptr)) records.push_back(trial_record_from_json(j, env));
  return records;
}

struct PartitionGroups {
  std::string partition;
  GroupCompareResult result;
  std::map<std::string, int> participants;  // family -> best-fit participant count
};

// Groups agents by whether their best-fitting variant belongs to each family.
std::vector<PartitionGroups> compare_by_best_fit(const std::vector<TrialRecord>& records,
                                                 const std::vector<FitRow>& rows,
                                                 const FamilyMap& families) {
  std::vector<std::string> ids;
  std::map<std::string, std::array<std::optional<double>, 8>> table;
  const auto variants = VariantSpec::all();
  for (const auto& r : rows) {
    if (!table.count(r.id)) ids.push_back(r.id);
    for (int v = 0; v < 8; ++v) {
      if (variants[v] == r.variant) table[r.id][v] = r.bic;
    }
  }
  std::vector<std::array<std::optional<double>, 8>> bics;
  for (const auto& id : ids) bics.push_back(table[id]);
  std::vector<VariantSpec> best;
  try {
    best = best_fit_grouping(bics);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMissingFit, e.what());
  }

  std::vector<PartitionGroups> out;
  for (const auto& [partition, fams] : families) {
    PartitionGroups pg;
    pg.partition = partition;
    std::map<int, std::string> group_of_agent;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      for (const auto& [family, members] : fams) {
        if (std::find(members.begin(), members.end(), best[p].name()) == members.end()) continue;
        group_of_agent[std::stoi(ids[p])] = family;
        ++pg.participants[family];
      }
    }
    const GroupedSamples groups = group_records(records, group_of_agent);
    if (groups.size() >= 2) pg.result = group_compare(groups);
    out.push_back(std::move(pg));
  }
  return out;
}

void require_inputs(const std::vector<fs::path>& paths) {
  std::string missing;
  for (const auto& p : paths) {
    if (!fs::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
  }
  if (!missing.empty()) throw Error(ErrorCode::kIo, "missing inputs: " + missing);
}

int cmd_analyze(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const fs::path records_path = flags.data.empty() ? cfg.out_dir / "records.jsonl" : fs::path(flags.data);
  require_inputs({records_path, cfg.out_dir / "fits.csv"});
  const auto records = load_records(records_path, *cfg.env);
  const auto rows = parse_fit_csv(read_file(cfg.out_dir / "fits.csv"));
  const auto parts = compare_by_best_fit(records, rows, load_families(flags, cfg));

  std::string summary = "group,metric,mean,std,n\n";
  std::string comparisons = "group_a,group_b,metric,U,p\n";
  for (const auto& pg : parts) {
    for (const auto& s : pg.result.summaries) {
      summary += fmt::format("{},{},{},{},{}\n", s.group, s.metric, format_double(s.mean),
                             format_double(s.sd), s.n);
    }
    for (const auto& c : pg.result.comparisons) {
      comparisons += fmt::format("{},{},{},{},{}\n", c.group_a, c.group_b, c.metric,
                                 format_double(c.test.u), format_double(c.test.p_two_sided));
    }
  }
  write_file_atomic(cfg.out_dir / "group_summary.csv", summary);
  write_file_atomic(cfg.out_dir / "comparisons.csv", comparisons);
  return kExitOk;
}

std::vector<CurvePoint> parse_discovery_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "trial,prop_adaptive,ci_lo,ci_hi") bad("discovery.csv: unexpected header");
  std::vector<CurvePoint> curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint c;
    char sep = 0;
    std::istringstream row(line);
    row >> c.trial >> sep >> c.proportion >> sep >> c.ci_lo >> sep >> c.ci_hi;
    if (!row) bad("discovery.csv: malformed row '" + line + "'");
    curve.push_back(c);
  }
  return curve;
}

int cmd_report(const CommonFlags& flags) {
  // The report only needs the outputs directory; a config is optional.
  std::optional<ExperimentConfig> cfg;
  if (!flags.config.empty()) cfg = load_with_overrides(flags);
  const fs::path dir = !flags.out.empty() ? fs::path(flags.out) : cfg ? cfg->out_dir : fs::path();
  if (dir.empty()) bad("report needs --out or --config");
  if (!fs::is_directory(dir) || fs::is_empty(dir)) {
    throw Error(ErrorCode::kIo, "outputs directory is missing or empty: " + dir.string());
  }
  const fs::path records_path = dir / "records.jsonl";
  require_inputs({dir / "discovery.csv", records_path, dir / "fits.csv", dir / "bms.json"});

  EnvPtr env = cfg ? cfg->env : std::make_shared<const EnvConfig>(EnvConfig::default_tree());
  const auto records = load_records(records_path, *env);
  const auto rows = parse_fit_csv(read_file(dir / "fits.csv"));
  const json bms = json::parse(read_file(dir / "bms.json"));
  const auto curve = parse_discovery_csv(read_file(dir / "discovery.csv"));
  const FamilyMap families = cfg ? load_families(flags, *cfg) : default_family_map();
  const auto parts = compare_by_best_fit(records, rows, families);

  std::string bms_csv = "partition,family,r,phi\n";
  for (const auto& [partition, fams] : families) {
    if (!bms.contains(partition)) bad("bms.json has no partition '" + partition + "'");
    for (const auto& [family, members] : fams) {
      bms_csv += fmt::format("{},{},{},{}\n", partition, family,
                             format_double(bms[partition]["r"][family].get<double>()),
                             format_double(bms[partition]["phi"][family].get<double>()));
    }
  }

  std::string groups_csv = "partition,family,metric,mean,std,n,U,p\n";
  json groups_json = json::object();
  for (const auto& pg : parts) {
    for (const auto& s : pg.result.summaries) {
      std::string u = "", p = "";
      for (const auto& c : pg.result.comparisons) {
        if (c.metric == s.metric && (c.group_a == s.group || c.group_b == s.group)) {
          // The test statistic is reported on the first group's row, as in a two-row table.
          u = format_double(c.test.u);
          p = format_double(c.test.p_two_sided);
        }
      }
      groups_csv += fmt::format("{},{},{},{},{},{},{},{}\n", pg.partition, s.group, s.metric,
                                format_double(s.mean), format_double(s.sd), s.n, u, p);
    }
    json counts = json::object();
    for (const auto& [family, n] : pg.participants) counts[family] = n;
    groups_json[pg.partition] = counts;
  }

  const MeanStd clicks = mean_clicks(records);
  const int last = curve.empty() ? 0 : curve.back().trial;
  json summary = {
      {"n_records", records.size()},
      {"n_participants_fitted", rows.size() / 8},
      {"discovery",
       {{"first_trial", curve.empty() ? 0.0 : curve.front().proportion},
        {"last_trial", curve.empty() ? 0.0 : curve.back().proportion},
        {"first_10", adaptive_proportion(records, 1, 10)},
        {"last_10", adaptive_proportion(records, last - 9, last)},
        {"slope", curve_slope(curve)}}},
      {"clicks", {{"mean", clicks.mean}, {"std", clicks.sd}}},
      {"best_fit_counts", groups_json},
      {"bms", bms},
  };
  write_file_atomic(dir / "report" / "summary.json", summary.dump(2) + "\n");
  write_file_atomic(dir / "report" / "bms_table.csv", bms_csv);
  write_file_atomic(dir / "report" / "group_table.csv", groups_csv);
  return kExitOk;
}

}  // namespace

ExperimentConfig load_experiment_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
  check_keys(j, "config", {"version", "seed", "env", "env_file", "features", "cohort", "fit", "bms", "out"});

  ExperimentConfig cfg;
  cfg.source = path;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  if (!j.contains("version")) bad("config: missing \"version\"");
  cfg.version = get_as<int>(j["version"], "version");
  if (cfg.version != 1) bad("config: unsupported version " + std::to_string(cfg.version));
  if (!j.contains("seed") || !j["seed"].is_number_integer()) bad("config: \"seed\" must be an integer");
  cfg.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("env") == j.contains("env_file")) bad("config: give exactly one of \"env\" or \"env_file\"");
  if (j.contains("env")) {
    cfg.env = std::make_shared<const EnvConfig>(
        j["env"].is_string() && j["env"] == "default" ? EnvConfig::default_tree() : env_from_json(j["env"]));
  } else {
    const fs::path env_path = resolve(get_as<std::string>(j["env_file"], "env_file"));
    if (!fs::exists(env_path)) throw Error(ErrorCode::kIo, "env file not found: " + env_path.string());
    try {
      cfg.env = std::make_shared<const EnvConfig>(env_from_json(json::parse(read_file(env_path))));
    } catch (const json::parse_error& e) {
      bad(env_path.string() + ": malformed JSON: " + e.what());
    }
  }
  cfg.features = features_from_json(j.value("features", json()), *cfg.env);
  cfg.fit.w_direction = default_w_direction(cfg.features);

  if (j.contains("fit")) {
    const json& f = j["fit"];
    check_keys(f, "fit", {"budget", "w_init_mode", "w_init_direction", "reward_form", "bic_n", "bounds"});
    cfg.fit.budget = get_as<int>(f.value("budget", json(cfg.fit.budget)), "fit.budget");
    if (cfg.fit.budget < 1) bad("fit.budget must be >= 1");
    const auto mode = get_as<std::string>(f.value("w_init_mode", json("scalar")), "fit.w_init_mode");
    if (mode == "scalar") {
      cfg.fit.w_mode = WInitMode::kScalar;
    } else if (mode == "full") {
      cfg.fit.w_mode = WInitMode::kFull;
    } else {
      bad("fit.w_init_mode must be \"scalar\" or \"full\"");
    }
    if (f.contains("w_init_direction")) {
      cfg.fit.w_direction = get_as<std::vector<double>>(f["w_init_direction"], "fit.w_init_direction");
      if (cfg.fit.w_direction.size() != cfg.features.size()) {
        bad("fit.w_init_direction must have one entry per feature");
      }
    }
    cfg.fit.reward_form = reward_form_from(f.value("reward_form", "immediate"));
    const auto n = f.value("bic_n", std::string("decisions"));
    if (n == "decisions") {
      cfg.fit.bic_count = BicCount::kDecisions;
    } else if (n == "clicks") {
      cfg.fit.bic_count = BicCount::kClicks;
    } else if (n == "trials") {
      cfg.fit.bic_count = BicCount::kTrials;
    } else {
      bad("fit.bic_n must be \"decisions\", \"clicks\" or \"trials\"");
    }
    if (f.contains("bounds")) {
      const json& b = f["bounds"];
      check_keys(b, "fit.bounds", {"alpha", "gamma", "tau", "pr_weight", "se_value", "w_init"});
      auto& fb = cfg.fit.bounds;
      if (b.contains("alpha")) fb.alpha = bound_from(b["alpha"], fb.alpha);
      if (b.contains("gamma")) fb.gamma = bound_from(b["gamma"], fb.gamma);
      if (b.contains("tau")) fb.tau = bound_from(b["tau"], fb.tau);
      if (b.contains("pr_weight")) fb.pr_weight = bound_from(b["pr_weight"], fb.pr_weight);
      if (b.contains("se_value")) fb.se_value = bound_from(b["se_value"], fb.se_value);
      if (b.contains("w_init")) fb.w_init = bound_from(b["w_init"], fb.w_init);
    }
  }

  if (j.contains("cohort")) {
    const json& c = j["cohort"];
    check_keys(c, "cohort", {"n_agents", "n_trials", "variant", "hyperparams", "reward_form", "max_ops"});
    CohortSection cs;
    cs.n_agents = get_as<int>(c.value("n_agents", json(1)), "cohort.n_agents");
    cs.n_trials = get_as<int>(c.value("n_trials", json(120)), "cohort.n_trials");
    if (cs.n_agents < 1 || cs.n_trials < 1) bad("cohort: n_agents and n_trials must be >= 1");
    cs.variant = variant_from_json(c.value("variant", json::object()));
    if (!c.contains("hyperparams")) bad("cohort: missing \"hyperparams\"");
    cs.hp = hyperparams_from_json(c["hyperparams"], cfg.features, cfg.fit.w_direction);
    cs.reward_form = reward_form_from(c.value("reward_form", "immediate"));
    cs.max_ops = get_as<int>(c.value("max_ops", json(0)), "cohort.max_ops");
    cfg.cohort = cs;
  }

  if (j.contains("bms")) {
    const json& b = j["bms"];
    check_keys(b, "bms", {"samples", "max_iter", "tol", "prior_scale", "families_file"});
    cfg.bms.options.samples = get_as<int>(b.value("samples", json(cfg.bms.options.samples)), "bms.samples");
    cfg.bms.options.max_iter = get_as<int>(b.value("max_iter", json(cfg.bms.options.max_iter)), "bms.max_iter");
    cfg.bms.options.tol = get_as<double>(b.value("tol", json(cfg.bms.options.tol)), "bms.tol");
    cfg.bms.prior_scale = get_as<double>(b.value("prior_scale", json(cfg.bms.prior_scale)), "bms.prior_scale");
    if (cfg.bms.options.samples < 1 || cfg.bms.options.max_iter < 1 || !(cfg.bms.prior_scale > 0.0)) {
      bad("bms: samples, max_iter and prior_scale must be positive");
    }
    if (b.contains("families_file")) {
      cfg.bms.families_file = resolve(get_as<std::string>(b["families_file"], "bms.families_file"));
    }
  }
  if (j.contains("out")) cfg.out_dir = resolve(get_as<std::string>(j["out"], "out"));
  return cfg;
}

int run_cli(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Metacognitive reinforcement learning: simulate, fit and compare planning models"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "Experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", flags.out, "Output directory (overrides the config's \"out\")");
    sub->add_option("--seed", flags.seed, "Global seed (overrides the config's \"seed\")");
    sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a cohort; writes records.jsonl, participants.jsonl, discovery.csv");
  add_common(simulate, true);

  auto* fit = app.add_subcommand("fit", "Fit all 8 variants per participant; writes fits.csv and fits.json");
  add_common(fit, true);
  fit->add_option("--data", flags.data, "Participant JSONL (default: <out>/participants.jsonl)");
  fit->add_option("--budget", flags.budget, "Optimizer evaluations per fit (overrides fit.budget)");

  auto* bms = app.add_subcommand("bms", "Family-level Bayesian model selection; writes bms.json");
  add_common(bms, true);
  bms->add_option("--data", flags.data, "Fit table CSV (default: <out>/fits.csv)");
  bms->add_option("--families", flags.families, "Family map JSON (default: PR/TD/SE partitions)");

  auto* analyze = app.add_subcommand("analyze", "Compare best-fit groups; writes group_summary.csv and comparisons.csv");
  add_common(analyze, true);
  analyze->add_option("--data", flags.data, "Trial records JSONL (default: <out>/records.jsonl)");
  analyze->add_option("--families", flags.families, "Family map JSON (default: PR/TD/SE partitions)");

  auto* report = app.add_subcommand("report", "Consolidate outputs into <out>/report/");
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string where = flags.config.empty() ? std::string("metamdp") : flags.config;
  try {
    if (simulate->parsed()) return cmd_simulate(flags);
    if (fit->parsed()) return cmd_fit(flags);
    if (bms->parsed()) return cmd_bms(flags);
    if (analyze->parsed()) return cmd_analyze(flags);
    if (report->parsed()) return cmd_report(flags);
  } catch (const Error& e) {
    std::cerr << "error: " << where << ": " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kInvalidConfig:
      case ErrorCode::kIo:
      case ErrorCode::kMissingFit:
        return kExitConfig;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << where << ": " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace metamdp
