#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kli/catalog.hpp"
#include "kli/cli.hpp"
#include "kli/detection.hpp"
#include "kli/error.hpp"
#include "kli/evaluation.hpp"
#include "kli/events.hpp"
#include "kli/rerank.hpp"
#include "kli/rng.hpp"
#include "kli/simulator.hpp"

namespace kli::cli {
namespace {

namespace fs = std::filesystem;

// Flag values plus the options they came from, so only flags the user
// actually passed override the config file.
struct Flags {
  std::string config_path;
  double alpha = 0;
  double significance = 0;
  std::size_t n_samples = 0;
  std::size_t m_max = 0;
  std::int64_t max_gap = 0;
  std::size_t n = 0;
  double smoothing_epsilon = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t candidates = 0;

  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_significance = nullptr;
  CLI::Option* o_n_samples = nullptr;
  CLI::Option* o_m_max = nullptr;
  CLI::Option* o_max_gap = nullptr;
  CLI::Option* o_n = nullptr;
  CLI::Option* o_smoothing_epsilon = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_threads = nullptr;
  CLI::Option* o_candidates = nullptr;
};

void add_config_flags(CLI::App* app, Flags& f, bool with_n) {
  app->add_option("--config", f.config_path, "JSON config file");
  f.o_alpha = app->add_option("--alpha", f.alpha, "Smoothing rate alpha for every property");
  f.o_significance = app->add_option("--significance", f.significance, "Test significance level");
  f.o_n_samples = app->add_option("--n-samples", f.n_samples, "Monte Carlo draws per threshold cell");
  f.o_m_max = app->add_option("--m-max", f.m_max, "Longest calibrated session length");
  f.o_max_gap = app->add_option("--max-gap", f.max_gap, "Session split gap in seconds");
  if (with_n) f.o_n = app->add_option("--n", f.n, "Number of recommendations");
  f.o_smoothing_epsilon =
      app->add_option("--smoothing-epsilon", f.smoothing_epsilon, "Uniform mixing weight for G_k");
  f.o_seed = app->add_option("--seed", f.seed, "Master RNG seed");
  f.o_threads = app->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  f.o_candidates = app->add_option("--candidates", f.candidates,
                                   "Re-rank only the base top-N0 (0 = re-score every item)");
}

Config resolve_config(const Flags& f) {
  Config c = f.config_path.empty() ? Config{} : Config::load(f.config_path);
  auto given = [](CLI::Option* o) { return o != nullptr && o->count() > 0; };
  if (given(f.o_alpha)) c.alpha = f.alpha;
  if (given(f.o_significance)) c.significance = f.significance;
  if (given(f.o_n_samples)) c.n_samples = f.n_samples;
  if (given(f.o_m_max)) c.M_max = f.m_max;
  if (given(f.o_max_gap)) c.max_gap_seconds = f.max_gap;
  if (given(f.o_n)) c.N = f.n;
  if (given(f.o_smoothing_epsilon)) c.smoothing_epsilon = f.smoothing_epsilon;
  if (given(f.o_seed)) c.seed = f.seed;
  if (given(f.o_threads)) c.threads = f.threads;
  if (given(f.o_candidates)) c.candidates = f.candidates;
  c.validate();
  return c;
}

GlobalModel global_for(const Catalog& catalog, const std::string& events_path, const Config& c,
                       std::ostream& err) {
  if (events_path.empty()) return fit_global_model(catalog, std::nullopt, c.smoothing_epsilon);
  const EventLog log = load_events(events_path);
  GlobalModel g = fit_global_model(catalog, std::span<const Event>(log.events), c.smoothing_epsilon);
  if (g.skipped_events > 0) {
    err << "warning: " << g.skipped_events << " training events name items not in the catalog\n";
  }
  return g;
}

AlphaRates alpha_for(const Catalog& catalog, const Config& c) {
  return make_alpha(catalog.schema(), c.alpha, c.alpha_overrides);
}

void apply_epsilon_overrides(ThresholdTable& table, const Catalog& catalog, const Config& c) {
  for (const auto& [key, eps] : c.epsilon_overrides) {
    table.override_threshold(catalog.schema().require(key), eps);
  }
}

std::vector<Session> load_sessions(const std::string& path, const Config& c, std::ostream& err) {
  const EventLog log = load_events(path);
  if (log.skipped_rows > 0) err << "warning: skipped " << log.skipped_rows << " malformed event rows\n";
  return split_sessions(log.events, c.max_gap_seconds);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Short-term interest detection and re-ranking for session recommenders", "kli"};
  app.require_subcommand(1);

  // calibrate
  Flags cal_flags;
  std::string cal_catalog, cal_events, cal_out;
  auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo null thresholds for every property and length");
  calibrate->add_option("--catalog", cal_catalog, "Catalog JSON")->required();
  calibrate->add_option("--events", cal_events, "Training events CSV used to estimate G");
  calibrate->add_option("--out", cal_out, "Threshold table JSON to write")->required();
  add_config_flags(calibrate, cal_flags, false);

  // detect
  Flags det_flags;
  std::string det_catalog, det_events, det_thresholds, det_train, det_out;
  auto* detect = app.add_subcommand("detect", "Interest report (JSON lines) for every session in a log");
  detect->add_option("--catalog", det_catalog, "Catalog JSON")->required();
  detect->add_option("--events", det_events, "Events CSV to sessionize and analyze")->required();
  detect->add_option("--thresholds", det_thresholds, "Threshold table JSON")->required();
  detect->add_option("--train-events", det_train, "Training events CSV used to estimate G");
  detect->add_option("--out", det_out, "Output file (default: stdout)");
  add_config_flags(detect, det_flags, false);

  // recommend
  Flags rec_flags;
  std::string rec_catalog, rec_thresholds, rec_train, rec_scorer = "static", rec_session_file;
  std::vector<std::string> rec_items;
  auto* rec = app.add_subcommand("recommend", "Enhanced top-N for one session");
  rec->add_option("--catalog", rec_catalog, "Catalog JSON")->required();
  rec->add_option("--thresholds", rec_thresholds, "Threshold table JSON")->required();
  rec->add_option("--train-events", rec_train, "Training events CSV used to estimate G");
  rec->add_option("--scorer", rec_scorer, "Base scorer")
      ->check(CLI::IsMember({"static", "uniform", "popularity"}));
  rec->add_option("--session-file", rec_session_file, "File with one item id per line");
  rec->add_option("items", rec_items, "Session item ids, oldest first");
  add_config_flags(rec, rec_flags, true);

  // simulate
  Flags sim_flags;
  std::string sim_out, sim_schema = "color:10,size:6,brand:12";
  std::size_t sim_items = 500, sim_sessions = 1000, sim_planted = 1, sim_min_len = 5, sim_max_len = 10;
  double sim_tilt = 3.0;
  auto* sim = app.add_subcommand("simulate", "Synthetic catalog and session log with planted interests");
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--schema", sim_schema, "Properties as key:count,...")->capture_default_str();
  sim->add_option("--items", sim_items, "Catalog size")->capture_default_str();
  sim->add_option("--sessions", sim_sessions, "Number of sessions")->capture_default_str();
  sim->add_option("--planted", sim_planted, "Planted properties per session")->capture_default_str();
  sim->add_option("--tilt", sim_tilt, "Boost ratio for the planted value")->capture_default_str();
  sim->add_option("--min-length", sim_min_len, "Shortest session")->capture_default_str();
  sim->add_option("--max-length", sim_max_len, "Longest session")->capture_default_str();
  add_config_flags(sim, sim_flags, false);

  // evaluate
  Flags ev_flags;
  std::string ev_catalog, ev_events, ev_thresholds, ev_train, ev_out, ev_algorithms;
  std::vector<std::size_t> ev_ns;
  auto* ev = app.add_subcommand("evaluate", "Leave-last-out DCG and hit comparison");
  ev->add_option("--catalog", ev_catalog, "Catalog JSON")->required();
  ev->add_option("--events", ev_events, "Events CSV to evaluate on")->required();
  ev->add_option("--thresholds", ev_thresholds, "Threshold table JSON (calibrated in-process if absent)");
  ev->add_option("--train-events", ev_train, "Training events CSV used to estimate G");
  ev->add_option("--algorithms", ev_algorithms,
                 "Comma list of static,uniform,popularity,kl-static,kl-uniform,kl-popularity");
  ev->add_option("--n", ev_ns, "Cut-off N (repeatable; default 5 10 20)");
  ev->add_option("--out", ev_out, "Report CSV to write");
  add_config_flags(ev, ev_flags, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      if (app.get_subcommands().size() == 1) out << app.get_subcommands()[0]->help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*calibrate) {
      const Config c = resolve_config(cal_flags);
      const Catalog catalog = load_catalog(cal_catalog);
      const GlobalModel global = global_for(catalog, cal_events, c, err);
      CalibrationParams params{c.significance, c.n_samples, c.M_max, c.seed, c.threads};
      const ThresholdTable table = calibrate_thresholds(global, catalog.schema(), alpha_for(catalog, c), params);
      write_file(cal_out, threshold_table_to_json(table));
      return 0;
    }

    if (*detect) {
      const Config c = resolve_config(det_flags);
      const Catalog catalog = load_catalog(det_catalog);
      const GlobalModel global = global_for(catalog, det_train, c, err);
      ThresholdTable table = load_threshold_table(det_thresholds);
      apply_epsilon_overrides(table, catalog, c);
      const AlphaRates alpha = alpha_for(catalog, c);
      const auto sessions = load_sessions(det_events, c, err);
      std::ostringstream lines;
      std::size_t skipped = 0;
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        std::vector<ItemIndex> items;
        bool known = true;
        for (const auto& id : sessions[s].items) {
          if (auto i = catalog.find(id)) items.push_back(*i);
          else known = false;
        }
        if (!known) {
          ++skipped;
          continue;
        }
        const InterestReport report = detect_interest(items, table, alpha, global, catalog);
        lines << report_to_json_line(report, sessions[s], s) << '\n';
      }
      if (skipped > 0) err << "warning: skipped " << skipped << " sessions with unknown items\n";
      if (det_out.empty()) out << lines.str();
      else write_file(det_out, lines.str());
      return 0;
    }

    if (*rec) {
      const Config c = resolve_config(rec_flags);
      const Catalog catalog = load_catalog(rec_catalog);
      const GlobalModel global = global_for(catalog, rec_train, c, err);
      ThresholdTable table = load_threshold_table(rec_thresholds);
      apply_epsilon_overrides(table, catalog, c);
      const AlphaRates alpha = alpha_for(catalog, c);
      Session session;
      if (!rec_session_file.empty()) {
        std::ifstream in(rec_session_file);
        if (!in) throw Error("cannot open session file '" + rec_session_file + "'");
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) session.items.push_back(line);
        }
      }
      for (const auto& id : rec_items) session.items.push_back(id);
      if (session.items.empty()) throw UsageError("recommend: no session items given");
      session.timestamps.assign(session.items.size(), 0);
      const auto items = resolve_items(catalog, session);
      const InterestReport report = detect_interest(items, table, alpha, global, catalog);
      const auto interests = report.interests();
      err << "interests:";
      for (const auto& k : interests) err << ' ' << k;
      err << (interests.empty() ? " (none)\n" : "\n");
      const RecommendOptions options{parse_scorer(rec_scorer), c.N, c.candidates};
      const RankedList list =
          recommend(items, interest_tilt(items, report, alpha, global, catalog), options, catalog, global);
      for (std::size_t r = 0; r < list.size(); ++r) {
        out << (r + 1) << '\t' << list.entries[r].item_id << '\t' << list.entries[r].score << '\n';
      }
      return 0;
    }

    if (*sim) {
      const Config c = resolve_config(sim_flags);
      const auto schema = parse_schema_spec(sim_schema);
      const SyntheticCatalog synth = synth_catalog(sim_items, schema, c.seed, c.smoothing_epsilon);
      SimulationOptions options;
      options.n_sessions = sim_sessions;
      options.min_length = sim_min_len;
      options.max_length = sim_max_len;
      options.planted_properties = sim_planted;
      options.tilt_ratio = sim_tilt;
      options.threads = c.threads;
      const auto sessions = simulate_sessions(synth.catalog, synth.global, options, derive_seed(c.seed, 1));
      fs::create_directories(sim_out);
      write_file(fs::path(sim_out) / "catalog.json", dump_catalog(synth.catalog));
      std::ostringstream events, truth;
      write_events_csv(events, to_events(sessions));
      write_truth_csv(truth, sessions, synth.catalog);
      write_file(fs::path(sim_out) / "events.csv", events.str());
      write_file(fs::path(sim_out) / "truth.csv", truth.str());
      return 0;
    }

    if (*ev) {
      const Config c = resolve_config(ev_flags);
      const Catalog catalog = load_catalog(ev_catalog);
      const GlobalModel global = global_for(catalog, ev_train, c, err);
      const AlphaRates alpha = alpha_for(catalog, c);
      ThresholdTable table;
      if (ev_thresholds.empty()) {
        CalibrationParams params{c.significance, c.n_samples, c.M_max, c.seed, c.threads};
        table = calibrate_thresholds(global, catalog.schema(), alpha, params);
      } else {
        table = load_threshold_table(ev_thresholds);
      }
      apply_epsilon_overrides(table, catalog, c);
      EvalOptions options;
      if (!ev_algorithms.empty()) {
        options.algorithms.clear();
        std::string_view rest = ev_algorithms;
        while (!rest.empty()) {
          const auto comma = rest.find(',');
          try {
            options.algorithms.push_back(Algorithm::parse(rest.substr(0, comma)));
          } catch (const Error& e) {
            throw UsageError(e.what());
          }
          rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
      }
      if (!ev_ns.empty()) options.ns = ev_ns;
      options.candidates = c.candidates;
      options.threads = c.threads;
      const auto sessions = load_sessions(ev_events, c, err);
      const EvalReport report = evaluate(sessions, catalog, global, table, alpha, options);
      if (!ev_out.empty()) write_file(ev_out, report_csv(report));
      out << report_table(report);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace kli::cli
