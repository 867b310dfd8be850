#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kli/catalog.hpp"
#include "kli/detection.hpp"
#include "kli/events.hpp"
#include "kli/rerank.hpp"

namespace kli {

struct LeaveLastOut {
  Session history;
  std::string target;
};

// history = all but the last event; nullopt for sessions shorter than 2.
std::optional<LeaveLastOut> leave_last_out(const Session& session);

// 1 / log2(l + 1) when the target sits at 1-based rank l <= n, else 0.
double dcg_at(const RankedList& recommendations, std::string_view target, std::size_t n);
int hit_at(const RankedList& recommendations, std::string_view target, std::size_t n);

// A base scorer, optionally enhanced by interest detection on the history.
struct Algorithm {
  ScorerKind scorer = ScorerKind::static_cosine;
  bool enhanced = false;

  // "static", "uniform", "popularity", or the same prefixed with "kl-".
  std::string name() const;
  static Algorithm parse(std::string_view name);
  bool operator==(const Algorithm&) const = default;
};

std::vector<Algorithm> default_algorithms();

struct EvalRecord {
  std::size_t session_id = 0;
  std::string algorithm;
  std::size_t n = 0;
  double dcg = 0.0;
  int hit = 0;
};

struct EvalSummaryRow {
  std::string algorithm;
  std::size_t n = 0;
  std::size_t sessions = 0;
  double mean_dcg = 0.0;
  double mean_hit = 0.0;
};

struct EvalReport {
  std::vector<EvalSummaryRow> rows;  // algorithm-major, then N ascending order as given
  std::vector<EvalRecord> records;   // filled when EvalOptions::keep_records
  std::size_t evaluated_sessions = 0;
  std::size_t skipped_short = 0;
  std::size_t skipped_unknown = 0;

  const EvalSummaryRow& row(std::string_view algorithm, std::size_t n) const;
};

struct EvalOptions {
  std::vector<Algorithm> algorithms = default_algorithms();
  std::vector<std::size_t> ns = {5, 10, 20};
  std::size_t candidates = 0;
  unsigned threads = 0;
  bool keep_records = false;
};

// Leave-last-out evaluation. Enhanced algorithms detect interest on the
// history only. Throws when no session has length >= 2.
EvalReport evaluate(std::span<const Session> sessions, const Catalog& catalog,
                    const GlobalModel& global, const ThresholdTable& table,
                    const AlphaRates& alpha, const EvalOptions& options);

// `algorithm,N,sessions,mean_dcg,mean_hit`
std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace kli
