#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "doctest.h"

#include "metamdp/cli.hpp"
#include "metamdp/io.hpp"

namespace fs = std::filesystem;
using metamdp::read_file;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

// Runs the CLI inside dir with stderr captured.
Run run(const fs::path& dir, const std::string& args) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && METAMDP_LOG=warn '" METAMDP_CLI_PATH "' " + args +
                          " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("metamdp_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kMinimal = R"({
  "version": 1,
  "seed": 3,
  "env": "default",
  "cohort": {"n_agents": 2, "n_trials": 3, "variant": "pr",
             "hyperparams": {"alpha": 0.01, "gamma": 1, "tau": 5, "pr_weight": 1}},
  "fit": {"budget": 20},
  "bms": {"samples": 5000},
  "out": "out"
})";

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("simulate writes one line per trial and is reproducible") {
  const auto d = fresh_dir("simulate");
  write(d / "c.json", kMinimal);
  REQUIRE(run(d, "simulate --config c.json").code == 0);
  const std::string first = read_file(d / "out" / "records.jsonl");
  CHECK(count_lines(first) == 6);
  CHECK(count_lines(read_file(d / "out" / "discovery.csv")) == 4);
  const std::string curve = read_file(d / "out" / "discovery.csv");
  REQUIRE(run(d, "simulate --config c.json --jobs 2").code == 0);
  CHECK(read_file(d / "out" / "records.jsonl") == first);
  CHECK(read_file(d / "out" / "discovery.csv") == curve);
  REQUIRE(run(d, "simulate --config c.json --seed 4").code == 0);
  CHECK(read_file(d / "out" / "records.jsonl") != first);
}

TEST_CASE("config errors exit with code 2") {
  const auto d = fresh_dir("config");
  std::string cfg = kMinimal;
  cfg.replace(cfg.find("\"env\": \"default\""), 16, "\"env_file\": \"nowhere/env.json\"");
  write(d / "c.json", cfg);
  const auto r = run(d, "simulate --config c.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("nowhere/env.json") != std::string::npos);

  write(d / "bad.json", R"({"version": 1, "env": "default"})");
  CHECK(run(d, "simulate --config bad.json").code == 2);
  write(d / "bad2.json", R"({"version": 2, "seed": 1, "env": "default"})");
  CHECK(run(d, "simulate --config bad2.json").code == 2);
  write(d / "bad3.json", R"({"version": 1, "seed": 1, "env": "default", "colour": 1})");
  const auto r3 = run(d, "simulate --config bad3.json");
  CHECK(r3.code == 2);
  CHECK(r3.err.find("colour") != std::string::npos);
  write(d / "bad4.json", "{\n  \"version\": 1,\n  \"seed\": 1,,\n}");
  const auto r4 = run(d, "simulate --config bad4.json");
  CHECK(r4.code == 2);
  CHECK(r4.err.find("line 3") != std::string::npos);
  CHECK(run(d, "simulate --config missing.json").code == 2);
}

TEST_CASE("fit produces eight rows per participant and honours --budget") {
  const auto d = fresh_dir("fit");
  write(d / "c.json", kMinimal);
  REQUIRE(run(d, "simulate --config c.json").code == 0);
  const std::string one = read_file(d / "out" / "participants.jsonl");
  write(d / "one.jsonl", one.substr(0, one.find('\n') + 1));
  REQUIRE(run(d, "fit --config c.json --data one.jsonl --budget 50").code == 0);
  const auto rows = metamdp::parse_fit_csv(read_file(d / "out" / "fits.csv"));
  CHECK(rows.size() == 8);
  const auto full = metamdp::json::parse(read_file(d / "out" / "fits.json"));
  REQUIRE(full.size() == 8);
  for (const auto& f : full) CHECK(f["iterations_used"] == 50);
}

TEST_CASE("a malformed participant line is skipped with a nonzero exit") {
  const auto d = fresh_dir("malformed");
  write(d / "c.json", kMinimal);
  REQUIRE(run(d, "simulate --config c.json").code == 0);
  write(d / "mixed.jsonl", read_file(d / "out" / "participants.jsonl") + "{not json\n");
  const auto r = run(d, "fit --config c.json --data mixed.jsonl");
  CHECK(r.code == 1);
  CHECK(r.err.find("mixed.jsonl:3") != std::string::npos);
  CHECK(metamdp::parse_fit_csv(read_file(d / "out" / "fits.csv")).size() == 16);
}

TEST_CASE("bms on complete, dominated and incomplete tables") {
  const auto d = fresh_dir("bms");
  write(d / "c.json", kMinimal);
  const char* names[] = {"plain", "pr", "se", "td", "pr_se", "pr_td", "se_td", "pr_se_td"};

  auto table = [&](auto bic_of) {
    std::string csv = std::string(metamdp::kFitCsvHeader) + "\n";
    for (int p = 0; p < 10; ++p) {
      for (int v = 0; v < 8; ++v) {
        csv += "p" + std::to_string(p) + "," + names[v] + ",0.1,1,1,0,0,-10," +
               metamdp::format_double(bic_of(v)) + ",20\n";
      }
    }
    return csv;
  };

  write(d / "uniform.csv", table([](int) { return 50.0; }));
  REQUIRE(run(d, "bms --config c.json --data uniform.csv").code == 0);
  auto bms = metamdp::json::parse(read_file(d / "out" / "bms.json"));
  for (const char* part : {"pr", "se", "td"}) {
    for (const auto& [family, r] : bms[part]["r"].items()) CHECK(r.get<double>() == doctest::Approx(0.5).epsilon(1e-3));
  }

  // Every PR variant is 40 BIC units (20 log-evidence units) better.
  write(d / "pr.csv", table([&](int v) { return std::string(names[v]).find("pr") == 0 ? 10.0 : 50.0; }));
  REQUIRE(run(d, "bms --config c.json --data pr.csv").code == 0);
  bms = metamdp::json::parse(read_file(d / "out" / "bms.json"));
  CHECK(bms["pr"]["phi"]["PR"].get<double>() > 0.99);

  std::string partial = table([](int) { return 50.0; });
  const auto cut = partial.find("p3,se_td");
  partial.erase(cut, partial.find('\n', cut) - cut + 1);
  write(d / "partial.csv", partial);
  const auto r = run(d, "bms --config c.json --data partial.csv");
  CHECK(r.code == 2);
  CHECK(r.err.find("(p3, se_td)") != std::string::npos);
}

TEST_CASE("full pipeline, report schema and empty outputs") {
  const auto d = fresh_dir("pipeline");
  write(d / "c.json", kMinimal);
  for (const char* cmd : {"simulate", "fit", "bms", "analyze", "report"}) {
    CAPTURE(cmd);
    REQUIRE(run(d, std::string(cmd) + " --config c.json").code == 0);
  }
  const auto bms_table = read_file(d / "out" / "report" / "bms_table.csv");
  CHECK(bms_table.substr(0, bms_table.find('\n')) == "partition,family,r,phi");
  CHECK(count_lines(bms_table) == 7);
  const auto groups = read_file(d / "out" / "report" / "group_table.csv");
  CHECK(groups.substr(0, groups.find('\n')) == "partition,family,metric,mean,std,n,U,p");
  const auto summary = metamdp::json::parse(read_file(d / "out" / "report" / "summary.json"));
  for (const char* key : {"n_records", "n_participants_fitted", "discovery", "clicks", "best_fit_counts", "bms"}) {
    CHECK(summary.contains(key));
  }
  CHECK(summary["n_records"] == 6);
  CHECK(read_file(d / "out" / "group_summary.csv").rfind("group,metric,mean,std,n\n", 0) == 0);
  CHECK(read_file(d / "out" / "comparisons.csv").rfind("group_a,group_b,metric,U,p\n", 0) == 0);

  fs::create_directories(d / "empty");
  CHECK(run(d, "report --out empty").code == 2);
  CHECK(run(d, "report --out does_not_exist").code == 2);
  fs::remove(d / "out" / "bms.json");
  const auto r = run(d, "report --out out");
  CHECK(r.code == 2);
  CHECK(r.err.find("bms.json") != std::string::npos);
}

TEST_CASE("every subcommand documents its flags") {
  const auto d = fresh_dir("help");
  const std::map<std::string, std::vector<std::string>> flags{
      {"simulate", {"--config", "--out", "--seed", "--jobs"}},
      {"fit", {"--config", "--out", "--seed", "--jobs", "--data", "--budget"}},
      {"bms", {"--config", "--out", "--seed", "--jobs", "--data", "--families"}},
      {"analyze", {"--config", "--out", "--seed", "--jobs", "--data", "--families"}},
      {"report", {"--config", "--out", "--seed", "--jobs"}}};
  for (const auto& [cmd, want] : flags) {
    const std::string out = (d / (cmd + ".txt")).string();
    (void)!std::system(("'" METAMDP_CLI_PATH "' " + cmd + " --help > '" + out + "' 2>&1").c_str());
    const std::string help = read_file(out);
    for (const auto& f : want) {
      CAPTURE(cmd);
      CAPTURE(f);
      CHECK(help.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("the bundled small config resolves its env file") {
  const auto d = fresh_dir("bundled");
  const auto cfg = metamdp::load_experiment_config(fs::path(METAMDP_CONFIG_DIR) / "small.json");
  CHECK(cfg.env->node_count() == 5);
  CHECK(cfg.cohort->n_agents == 6);
  CHECK(metamdp::load_experiment_config(fs::path(METAMDP_CONFIG_DIR) / "demo.json").cohort->n_agents == 100);
}
