#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "edwait/digest.hpp"
#include "edwait/pipeline.hpp"
#include "helpers.hpp"

using namespace edwait;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

// Two weeks of the default network written as simulation output.
const fs::path& simulated_data() {
  static testing::TempDir dir("pipeline_data");
  static const bool written = [] {
    auto cfg = default_config();
    cfg.duration_days = 14;
    const auto log = simulate_network(cfg.network, 14 * 1440, 5);
    write_simulation(log, cfg, dir.path());
    return true;
  }();
  (void)written;
  return dir.path();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EDWAIT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("write_simulation writes logs and a snapshot") {
  const auto& dir = simulated_data();
  CHECK(fs::exists(dir / "predictions.csv"));
  CHECK(fs::exists(dir / "visits.csv"));
  const auto snap = load_config(dir / "config.json");
  CHECK(snap.seed == 5);
  CHECK(snap.duration_days == 14.0);
  CHECK(lines_of(dir / "visits.csv").size() > 1000);
}

TEST_CASE("run_pipeline: 36 rows per outcome and subgroup") {
  testing::TempDir out("pipeline_out");
  const auto result = run_pipeline(simulated_data(), out.path(), {});
  const auto rows = lines_of(out.path() / "irf.csv");
  REQUIRE(rows.size() > 1);
  std::map<std::string, int> per_cell;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    ++per_cell[f[0] + "/" + f[1]];
    CHECK(f[2] == "pooled");
  }
  CHECK(per_cell.size() == 7 * 3);
  for (const auto& [cell, n] : per_cell) {
    INFO(cell);
    CHECK(n == 36);
  }
  CHECK(result.irf_rows == rows.size() - 1);
}

TEST_CASE("run_pipeline: byte-identical reruns and a complete manifest") {
  testing::TempDir a("pipeline_a"), b("pipeline_b");
  run_pipeline(simulated_data(), a.path(), {});
  run_pipeline(simulated_data(), b.path(), {});
  for (const char* name : {"irf.csv", "elasticity.csv"}) CHECK(slurp(a.path() / name) == slurp(b.path() / name));

  const auto manifest = nlohmann::json::parse(slurp(a.path() / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["seeds"]["simulation"] == 5);
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) {
    const std::string path = f["path"];
    listed.insert(path);
    CHECK(f["sha256"] == sha256_file(a.path() / path));
    CHECK(f["bytes"] == fs::file_size(a.path() / path));
  }
  for (const auto& entry : fs::directory_iterator(a.path())) {
    const auto name = entry.path().filename().string();
    if (name != "manifest.json") CHECK(listed.count(name) == 1);
  }
  CHECK(manifest["panels"]["waiting"]["observations"].get<int>() > 0);
}

TEST_CASE("run_pipeline: interacted fits and the elasticity grid") {
  testing::TempDir out("pipeline_rd");
  PipelineOptions opts;
  opts.estimation.interact_rd = true;
  opts.estimation.outcomes = {*OutcomeSelector::parse("waiting")};
  opts.estimation.subgroups = {Subgroup::All};
  run_pipeline(simulated_data(), out.path(), opts);
  const auto irf = lines_of(out.path() / "irf.csv");
  std::set<std::string> labels;
  for (std::size_t i = 1; i < irf.size(); ++i) labels.insert(split(irf[i])[2]);
  CHECK_FALSE(labels.empty());
  for (const auto& l : labels) CHECK(RdPoint::from_label(l).has_value());

  const auto el = lines_of(out.path() / "elasticity.csv");
  REQUIRE(el.size() == 1 + 8 * 3 * 3);
  for (std::size_t i = 1; i < el.size(); ++i) {
    const auto f = split(el[i]);
    CHECK(f[0] != "270-300");
    CHECK((f[1] == "30" || f[1] == "90" || f[1] == "150"));
  }
}

TEST_CASE("run_pipeline: heaped input is flagged by the diagnostic") {
  testing::TempDir data("pipeline_heaped"), out("pipeline_heaped_out");
  auto cfg = default_config();
  cfg.duration_days = 14;
  auto log = simulate_network(cfg.network, 14 * 1440, 6);
  RandomStream rng(6, 99);
  log.predictions = inject_heaping(log.predictions, 0.3, rng);
  write_simulation(log, cfg, data.path());
  PipelineOptions opts;
  opts.diagnose = true;
  opts.estimation.outcomes = {*OutcomeSelector::parse("waiting")};
  opts.estimation.subgroups = {Subgroup::All};
  run_pipeline(data.path(), out.path(), opts);
  const auto rows = lines_of(out.path() / "heaping.csv");
  REQUIRE(rows.size() == 25);
  CHECK(rows[0] == "bin_lo,bin_hi,count,neighbor_median,flagged,kind");
  int boundary_flags = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    if (f[4] == "1" && std::stod(f[0]) >= 0.0 && std::stod(f[0]) < 0.5) ++boundary_flags;
  }
  CHECK(boundary_flags >= 1);
  const auto manifest = nlohmann::json::parse(slurp(out.path() / "manifest.json"));
  CHECK(manifest["heaping"]["boundary_heaping"] == true);
}

TEST_CASE("run_pipeline: failures name the stage and keep a manifest") {
  testing::TempDir data("pipeline_bad"), out("pipeline_bad_out");
  { std::ofstream(data.path() / "predictions.csv") << "site_id,timestamp,granular_min\nED1,2019-01-01T00:00,70\n"; }
  { std::ofstream(data.path() / "visits.csv") << "visit_id,site_id,ctas,triage_ts,physician_ts,discharge_ts\n"; }
  try {
    run_pipeline(data.path(), out.path(), {});
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "panel");
    CHECK(e.kind() == FailureKind::Estimation);
  }
  const auto manifest = nlohmann::json::parse(slurp(out.path() / "manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["failed_stage"] == "panel");

  fs::remove(data.path() / "visits.csv");
  try {
    run_pipeline(data.path(), out.path(), {});
    FAIL("expected PipelineError");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(e.kind() == FailureKind::Data);
  }
}

TEST_CASE("cli: exit codes") {
  testing::TempDir dir("cli");
  const auto out = dir.path().string();
  CHECK(run_cli("simulate --duration-days 0 --out " + out + "/empty") == 0);
  CHECK(lines_of(dir.path() / "empty" / "visits.csv").size() == 1);
  CHECK(run_cli("recovery --reps 1 --out " + out + "/rec") == 1);
  CHECK(run_cli("pipeline --data " + out + "/missing --out " + out + "/p") == 2);
  CHECK(run_cli("pipeline --data " + out + "/empty --out " + out + "/p2") == 2);
  CHECK(run_cli("simulate --bogus") == 1);
  CHECK(run_cli("pipeline --data " + out + "/empty --bandwidth -2") == 1);
  {
    std::ofstream(dir.path() / "bad.json") << R"({"sites": [{"site_id": "ED1", "server_count": 0}]})";
  }
  CHECK(run_cli("simulate --config " + out + "/bad.json --out " + out + "/x") == 1);
}

TEST_CASE("cli: simulate then pipeline") {
  testing::TempDir dir("cli_chain");
  const auto out = dir.path().string();
  REQUIRE(run_cli("simulate --duration-days 10 --seed 3 --out " + out + "/sim") == 0);
  REQUIRE(run_cli("pipeline --data " + out + "/sim --out " + out + "/est --outcome waiting --subgroup all") == 0);
  CHECK(lines_of(dir.path() / "est" / "irf.csv").size() == 37);
}
