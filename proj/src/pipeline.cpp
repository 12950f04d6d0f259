#include "edwait/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "edwait/digest.hpp"
#include "edwait/ingest.hpp"
#include "edwait/timefmt.hpp"

namespace edwait {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

class Manifest {
 public:
  explicit Manifest(fs::path out_dir) : dir_(std::move(out_dir)) {
    doc_["software"] = {{"name", "edwait"}, {"version", kVersion}};
    doc_["status"] = "running";
  }

  json& doc() { return doc_; }

  void add_file(const fs::path& file) {
    files_.push_back({{"path", fs::relative(file, dir_).generic_string()},
                      {"sha256", sha256_file(file)},
                      {"bytes", fs::file_size(file)}});
  }

  void write() {
    doc_["files"] = files_;
    auto out = open_out(dir_ / "manifest.json");
    out << doc_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json doc_;
  json files_ = json::array();
};

}  // namespace

std::vector<fs::path> write_simulation(const EventLog& log, const RunConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> files;

  files.push_back(out_dir / kPredictionsFile);
  {
    auto out = open_out(files.back());
    write_predictions_csv(out, log.predictions);
  }
  files.push_back(out_dir / kVisitsFile);
  {
    auto out = open_out(files.back());
    write_visits_csv(out, log.visits);
  }
  files.push_back(out_dir / kConfigSnapshotFile);
  {
    RunConfig snapshot = config;
    snapshot.network = log.config;
    snapshot.seed = log.seed;
    snapshot.duration_days = static_cast<double>(log.duration_min) / 1440.0;
    auto out = open_out(files.back());
    out << config_to_json(snapshot);
  }
  files.push_back(out_dir / "summary.csv");
  {
    auto out = open_out(files.back());
    out << "site_id,kind,ctas,arrivals,balked,presented\n";
    for (const auto& s : log.summaries) {
      for (int c = 1; c <= kCtasLevels; ++c) {
        const auto i = static_cast<std::size_t>(c - 1);
        out << s.site_id << ',' << to_string(s.kind) << ',' << c << ',' << s.arrivals[i] << ',' << s.balked[i] << ','
            << s.arrivals[i] - s.balked[i] << '\n';
      }
    }
  }
  return files;
}

void print_summary(std::ostream& out, const EventLog& log) {
  PerCtas<std::int64_t> arrived_all{};
  PerCtas<std::int64_t> presented_all{};
  for (const auto& s : log.summaries) {
    std::int64_t arrivals = 0;
    std::int64_t balked = 0;
    for (std::size_t c = 0; c < kCtasLevels; ++c) {
      arrivals += s.arrivals[c];
      balked += s.balked[c];
      arrived_all[c] += s.arrivals[c];
      presented_all[c] += s.arrivals[c] - s.balked[c];
    }
    out << s.site_id << " (" << to_string(s.kind) << "): " << arrivals - balked << " visits, " << balked
        << " balked of " << arrivals << " arrivals, " << s.predictions << " predictions\n";
  }
  auto mix = [&out](const char* label, const PerCtas<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (auto n : counts) total += n;
    if (total == 0) return;
    out << "CTAS mix of " << label << ':';
    for (std::size_t c = 0; c < kCtasLevels; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %zu:%.2f%%", c + 1, 100.0 * counts[c] / static_cast<double>(total));
      out << buf;
    }
    out << '\n';
  };
  // Balking thins low acuity more, so only the arrival mix tracks the configured weights.
  mix("arrivals", arrived_all);
  mix("visits", presented_all);
}

PipelineResult run_pipeline(const fs::path& data_dir, const fs::path& out_dir, const PipelineOptions& options,
                            std::ostream* log) {
  auto say = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };
  fs::create_directories(out_dir);
  Manifest manifest(out_dir);
  PipelineResult result;
  const auto& est = options.estimation;
  std::string stage;

  auto emit = [&](const std::string& name, auto&& writer) {
    const fs::path file = out_dir / name;
    {
      auto out = open_out(file);
      writer(out);
    }
    manifest.add_file(file);
    result.files.push_back(file);
  };

  try {
    // ---- ingest
    stage = "ingest";
    SiteKindMap kinds;
    std::optional<StockWindow> window;
    json inputs = json::array();
    const fs::path snapshot = data_dir / kConfigSnapshotFile;
    if (fs::exists(snapshot)) {
      RunConfig snap;
      try {
        snap = load_config(snapshot);
      } catch (const ConfigError& e) {
        throw DataError(std::string("config snapshot: ") + e.what());
      }
      for (const auto& s : snap.network.sites) kinds[s.site_id] = s.kind;
      const auto minutes = static_cast<EpochMinutes>(std::llround(snap.duration_days * 1440.0));
      window = StockWindow{snap.network.start, snap.network.start + minutes};
      manifest.doc()["seeds"] = {{"simulation", snap.seed}};
      inputs.push_back({{"path", kConfigSnapshotFile}, {"sha256", sha256_file(snapshot)}});
    }
    for (const char* name : {kPredictionsFile, kVisitsFile}) {
      if (!fs::exists(data_dir / name)) throw DataError(std::string("missing input file ") + name);
      inputs.push_back({{"path", name}, {"sha256", sha256_file(data_dir / name)}});
    }
    manifest.doc()["inputs"] = inputs;

    auto predictions = parse_prediction_log(data_dir / kPredictionsFile, kinds);
    auto visits = parse_visit_log(data_dir / kVisitsFile);
    result.predictions = predictions.predictions.size();
    result.visits = visits.visits.size();
    say("ingest: " + std::to_string(result.predictions) + " predictions (" +
        std::to_string(predictions.warnings.size()) + " warnings), " + std::to_string(result.visits) + " visits (" +
        std::to_string(visits.rejected.size()) + " rejected)");
    manifest.doc()["rows"] = {{"predictions", result.predictions},
                              {"prediction_warnings", predictions.warnings.size()},
                              {"visits", result.visits},
                              {"visits_rejected", visits.rejected.size()}};
    if (!predictions.warnings.empty() || !visits.rejected.empty()) {
      emit("ingest_issues.csv", [&](std::ostream& out) {
        out << "file,line,message\n";
        auto quote = [](const std::string& s) {
          std::string q = "\"";
          for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          return q + "\"";
        };
        for (const auto& w : predictions.warnings) out << kPredictionsFile << ',' << w.line << ',' << quote(w.message) << '\n';
        for (const auto& w : visits.rejected) out << kVisitsFile << ',' << w.line << ',' << quote(w.message) << '\n';
      });
    }
    if (predictions.predictions.empty()) throw DataError("no usable predictions");

    // ---- stocks
    stage = "stocks";
    std::set<std::string> sites;
    for (const auto& p : predictions.predictions) sites.insert(p.site_id());
    if (!window) {
      EpochMinutes lo = predictions.predictions.front().t();
      EpochMinutes hi = lo;
      for (const auto& p : predictions.predictions) {
        lo = std::min(lo, p.t());
        hi = std::max(hi, p.t());
      }
      for (const auto& v : visits.visits) {
        lo = std::min(lo, v.triage_ts());
        hi = std::max({hi, v.triage_ts(), v.physician_ts().value_or(hi), v.discharge_ts().value_or(hi)});
      }
      window = StockWindow{lo, hi + 1};
    }
    StockMap stocks;
    for (const auto& s : sites) stocks.emplace(s, build_stock_series(visits.visits, s, 1, window));
    if (options.write_stocks) {
      emit("stocks.csv", [&](std::ostream& out) {
        bool header = true;
        for (const auto& [site, series] : stocks) {
          write_stocks_csv(out, series, header);
          header = false;
        }
      });
    }

    // ---- diagnostics
    if (options.diagnose) {
      stage = "diagnostics";
      try {
        const auto report = heaping_diagnostic(predictions.predictions, 0.25, est.panel.bandwidth);
        emit("heaping.csv", [&](std::ostream& out) { write_heaping_csv(out, report); });
        manifest.doc()["heaping"] = {{"observations", report.n},
                                     {"integer_heaping", report.integer_heaping},
                                     {"boundary_heaping", report.boundary_heaping}};
        say(std::string("heaping: integer ") + (report.integer_heaping ? "yes" : "no") + ", boundary " +
            (report.boundary_heaping ? "yes" : "no"));
      } catch (const DiagnosticDeclined& e) {
        result.notes.push_back(std::string("heaping diagnostic declined: ") + e.what());
        manifest.doc()["heaping"] = {{"declined", e.what()}};
      }
    }

    // ---- panels and projections
    stage = "panel";
    std::vector<OutcomeSelector> outcomes = est.outcomes;
    const Subgroup elasticity_subgroup = est.subgroups.size() == 1 ? est.subgroups.front() : Subgroup::All;
    for (auto g : {AcuityGroup::All, AcuityGroup::Low, AcuityGroup::High}) {
      if (std::find(outcomes.begin(), outcomes.end(), outcome_for(g)) == outcomes.end()) outcomes.push_back(outcome_for(g));
    }
    std::map<std::string, Panel> panels;
    json panel_counts = json::object();
    for (const auto& o : outcomes) {
      auto panel = build_panel(predictions.predictions, stocks, o, est.panel);
      panel_counts[o.tag()] = {{"observations", panel.observations.size()},
                               {"in_band_events", panel.in_band_events},
                               {"dropped_no_stocks", panel.dropped_no_stocks},
                               {"dropped_coverage", panel.dropped_coverage}};
      panels.emplace(o.tag(), std::move(panel));
    }
    manifest.doc()["panels"] = panel_counts;
    if (options.write_panels) {
      for (const auto& o : est.outcomes) {
        emit("panel_" + o.tag() + ".csv", [&](std::ostream& out) { write_panel_csv(out, panels.at(o.tag())); });
      }
    }
    say("panel: " + std::to_string(panels.begin()->second.observations.size()) + " RD events");

    stage = "irf";
    std::vector<IrfEstimate> irf_rows;
    json failures = json::array();
    IrfOptions irf_opts;
    irf_opts.interact_rd = est.interact_rd;
    irf_opts.hc = est.hc;
    for (const auto& o : est.outcomes) {
      for (auto g : est.subgroups) {
        try {
          auto r = estimate_irf(panels.at(o.tag()), g, irf_opts);
          irf_rows.insert(irf_rows.end(), r.estimates.begin(), r.estimates.end());
          for (const auto& f : r.failures) {
            failures.push_back({{"outcome", o.tag()}, {"subgroup", to_string(g)}, {"horizon", f.horizon},
                                {"message", f.message}});
          }
        } catch (const EstimationError& e) {
          result.notes.push_back(o.tag() + "/" + std::string(to_string(g)) + ": " + e.what());
          failures.push_back({{"outcome", o.tag()}, {"subgroup", to_string(g)}, {"message", e.what()}});
        }
      }
    }
    manifest.doc()["irf_failures"] = failures;
    if (irf_rows.empty()) throw EstimationError("no outcome and subgroup produced estimates");
    emit("irf.csv", [&](std::ostream& out) { write_irf_csv(out, irf_rows); });
    result.irf_rows = irf_rows.size();

    // ---- elasticity
    stage = "elasticity";
    std::vector<int> el_horizons;
    for (int hm : kElasticityHorizonsMin) {
      if (hm % est.panel.grid_min == 0 && hm / est.panel.grid_min <= est.panel.leads) el_horizons.push_back(hm / est.panel.grid_min);
    }
    std::vector<ElasticityEstimate> el_rows;
    if (!el_horizons.empty()) {
      IrfOptions el_opts;
      el_opts.interact_rd = true;
      el_opts.hc = est.hc;
      el_opts.horizons = el_horizons;
      std::vector<std::vector<IrfEstimate>> fits;
      std::vector<AcuityGroup> groups;
      fits.reserve(3);
      for (auto g : {AcuityGroup::All, AcuityGroup::Low, AcuityGroup::High}) {
        try {
          fits.push_back(estimate_irf(panels.at(outcome_for(g).tag()), elasticity_subgroup, el_opts).estimates);
          groups.push_back(g);
        } catch (const EstimationError& e) {
          result.notes.push_back(std::string("elasticity ") + std::string(to_string(g)) + ": " + e.what());
        }
      }
      std::vector<AcuityInput> inputs_el;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        inputs_el.push_back({groups[i], &panels.at(outcome_for(groups[i]).tag()), &fits[i]});
      }
      el_rows = elasticity_profile(inputs_el, elasticity_subgroup);
    }
    emit("elasticity.csv", [&](std::ostream& out) { write_elasticity_csv(out, el_rows); });
    result.elasticity_rows = el_rows.size();
    manifest.doc()["elasticity_subgroup"] = to_string(elasticity_subgroup);

    manifest.doc()["options"] = {{"bandwidth", est.panel.bandwidth},
                                 {"grid_min", est.panel.grid_min},
                                 {"leads", est.panel.leads},
                                 {"lags", est.panel.lags},
                                 {"interact_rd", est.interact_rd},
                                 {"hc", est.hc == HcVariant::HC0 ? "HC0" : "HC1"}};
    manifest.doc()["notes"] = result.notes;
    manifest.doc()["status"] = "ok";
    manifest.write();
    result.files.push_back(out_dir / "manifest.json");
    return result;
  } catch (const DataError& e) {
    manifest.doc()["status"] = "failed";
    manifest.doc()["failed_stage"] = stage;
    manifest.doc()["error"] = e.what();
    manifest.write();
    throw PipelineError(stage, FailureKind::Data, e.what());
  } catch (const EstimationError& e) {
    manifest.doc()["status"] = "failed";
    manifest.doc()["failed_stage"] = stage;
    manifest.doc()["error"] = e.what();
    manifest.write();
    throw PipelineError(stage, FailureKind::Estimation, e.what());
  } catch (const EmptyPanelError& e) {
    manifest.doc()["status"] = "failed";
    manifest.doc()["failed_stage"] = stage;
    manifest.doc()["error"] = e.what();
    manifest.write();
    throw PipelineError(stage, FailureKind::Estimation, e.what());
  }
}

}  // namespace edwait
