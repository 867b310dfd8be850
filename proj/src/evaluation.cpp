#include "kli/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kli/error.hpp"
#include "kli/parallel.hpp"

namespace kli {

std::optional<LeaveLastOut> leave_last_out(const Session& session) {
  if (session.size() < 2) return std::nullopt;
  LeaveLastOut split;
  split.history = session;
  split.history.items.pop_back();
  split.history.timestamps.pop_back();
  split.target = session.items.back();
  return split;
}

namespace {

// 1-based rank of target within the first n entries, 0 if absent.
std::size_t rank_of(const RankedList& recommendations, std::string_view target, std::size_t n) {
  const std::size_t limit = std::min(n, recommendations.size());
  for (std::size_t l = 0; l < limit; ++l) {
    if (recommendations.entries[l].item_id == target) return l + 1;
  }
  return 0;
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double dcg_at(const RankedList& recommendations, std::string_view target, std::size_t n) {
  const std::size_t l = rank_of(recommendations, target, n);
  return l == 0 ? 0.0 : discount(l);
}

int hit_at(const RankedList& recommendations, std::string_view target, std::size_t n) {
  return rank_of(recommendations, target, n) == 0 ? 0 : 1;
}

std::string Algorithm::name() const {
  return std::string(enhanced ? "kl-" : "") + to_string(scorer);
}

Algorithm Algorithm::parse(std::string_view name) {
  Algorithm a;
  if (name.starts_with("kl-")) {
    a.enhanced = true;
    name.remove_prefix(3);
  }
  a.scorer = parse_scorer(name);
  return a;
}

std::vector<Algorithm> default_algorithms() {
  return {{ScorerKind::static_cosine, false}, {ScorerKind::uniform, false},
          {ScorerKind::popularity, false},    {ScorerKind::static_cosine, true},
          {ScorerKind::uniform, true},        {ScorerKind::popularity, true}};
}

const EvalSummaryRow& EvalReport::row(std::string_view algorithm, std::size_t n) const {
  for (const auto& r : rows) {
    if (r.algorithm == algorithm && r.n == n) return r;
  }
  throw Error("evaluation report has no row for " + std::string(algorithm) + "@" + std::to_string(n));
}

EvalReport evaluate(std::span<const Session> sessions, const Catalog& catalog,
                    const GlobalModel& global, const ThresholdTable& table,
                    const AlphaRates& alpha, const EvalOptions& options) {
  if (options.algorithms.empty()) throw Error("evaluate: no algorithms");
  if (options.ns.empty()) throw Error("evaluate: no N values");
  for (std::size_t n : options.ns) {
    if (n < 1) throw Error("evaluate: N must be >= 1");
  }
  const std::size_t max_n = *std::max_element(options.ns.begin(), options.ns.end());
  const std::size_t n_alg = options.algorithms.size();

  enum class Status : unsigned char { ok, too_short, unknown_item };
  std::vector<Status> status(sessions.size(), Status::ok);
  // ranks[s * n_alg + a]: 1-based target rank within the top max_n, 0 = miss.
  std::vector<std::size_t> ranks(sessions.size() * n_alg, 0);

  parallel_for(sessions.size(), options.threads, [&](std::size_t s) {
    const Session& session = sessions[s];
    if (session.size() < 2) {
      status[s] = Status::too_short;
      return;
    }
    std::vector<ItemIndex> items;
    items.reserve(session.size());
    for (const auto& id : session.items) {
      auto i = catalog.find(id);
      if (!i) {
        status[s] = Status::unknown_item;
        return;
      }
      items.push_back(*i);
    }
    const std::span<const ItemIndex> history(items.data(), items.size() - 1);
    const std::string& target = session.items.back();

    InterestTilt tilt;
    bool tilt_ready = false;
    for (std::size_t a = 0; a < n_alg; ++a) {
      const Algorithm& alg = options.algorithms[a];
      if (alg.enhanced && !tilt_ready) {
        const InterestReport report = detect_interest(history, table, alpha, global, catalog);
        tilt = interest_tilt(history, report, alpha, global, catalog);
        tilt_ready = true;
      }
      const RecommendOptions ro{alg.scorer, max_n, options.candidates};
      const RankedList list = alg.enhanced ? recommend(history, tilt, ro, catalog, global)
                                           : recommend(history, InterestTilt{}, ro, catalog, global);
      ranks[s * n_alg + a] = rank_of(list, target, max_n);
    }
  });

  EvalReport report;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    if (status[s] == Status::too_short) ++report.skipped_short;
    else if (status[s] == Status::unknown_item) ++report.skipped_unknown;
    else ++report.evaluated_sessions;
  }
  if (report.evaluated_sessions == 0) {
    throw Error("evaluate: no evaluable sessions (need length >= 2 and known items)");
  }

  for (std::size_t a = 0; a < n_alg; ++a) {
    // Hits per rank position; summing these in rank order makes the means
    // independent of session order.
    std::vector<std::size_t> at_rank(max_n + 1, 0);
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      if (status[s] == Status::ok) ++at_rank[ranks[s * n_alg + a]];
    }
    const std::string name = options.algorithms[a].name();
    for (std::size_t n : options.ns) {
      std::size_t hits = 0;
      double dcg_sum = 0.0;
      for (std::size_t l = 1; l <= n; ++l) {
        hits += at_rank[l];
        dcg_sum += static_cast<double>(at_rank[l]) * discount(l);
      }
      const auto total = static_cast<double>(report.evaluated_sessions);
      report.rows.push_back({name, n, report.evaluated_sessions, dcg_sum / total,
                             static_cast<double>(hits) / total});
    }
    if (options.keep_records) {
      for (std::size_t s = 0; s < sessions.size(); ++s) {
        if (status[s] != Status::ok) continue;
        const std::size_t l = ranks[s * n_alg + a];
        for (std::size_t n : options.ns) {
          const bool hit = l != 0 && l <= n;
          report.records.push_back({s, name, n, hit ? discount(l) : 0.0, hit ? 1 : 0});
        }
      }
    }
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "algorithm,N,sessions,mean_dcg,mean_hit\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.12g,%.12g\n", r.algorithm.c_str(), r.n,
                  r.sessions, r.mean_dcg, r.mean_hit);
    out += buf;
  }
  return out;
}

std::string report_table(const EvalReport& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %5s %9s %10s %10s\n", "algorithm", "N", "sessions",
                "mean_dcg", "mean_hit");
  out += buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %5zu %9zu %10.6f %10.6f\n", r.algorithm.c_str(), r.n,
                  r.sessions, r.mean_dcg, r.mean_hit);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "evaluated %zu sessions; skipped %zu too short, %zu with unknown items\n",
                report.evaluated_sessions, report.skipped_short, report.skipped_unknown);
  out += buf;
  return out;
}

}  // namespace kli
