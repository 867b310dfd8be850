#include "kli/events.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kli/error.hpp"

namespace kli {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

const char* to_string(EventType type) {
  return type == EventType::purchase ? "purchase" : "view";
}

const char* to_string(SessionEnd end) {
  switch (end) {
    case SessionEnd::gap: return "gap";
    case SessionEnd::purchase: return "purchase";
    case SessionEnd::end_of_log: return "end-of-log";
  }
  return "end-of-log";
}

EventLog parse_events(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("events: missing header row");
  const auto header = split_fields(trim_cr(line));
  int col_user = -1, col_item = -1, col_ts = -1, col_type = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = header[c];
    if (name == "user_id") col_user = static_cast<int>(c);
    else if (name == "item_id") col_item = static_cast<int>(c);
    else if (name == "timestamp") col_ts = static_cast<int>(c);
    else if (name == "event_type") col_type = static_cast<int>(c);
  }
  if (col_user < 0 || col_item < 0 || col_ts < 0 || col_type < 0) {
    throw Error("events: header must name user_id,item_id,timestamp,event_type");
  }
  const std::size_t width = header.size();

  EventLog log;
  while (std::getline(in, line)) {
    const auto row = trim_cr(line);
    if (row.empty()) continue;
    const auto f = split_fields(row);
    if (f.size() != width || f[col_user].empty() || f[col_item].empty()) {
      ++log.skipped_rows;
      continue;
    }
    std::int64_t ts = 0;
    const auto ts_field = f[col_ts];
    auto [ptr, ec] = std::from_chars(ts_field.data(), ts_field.data() + ts_field.size(), ts);
    if (ec != std::errc{} || ptr != ts_field.data() + ts_field.size() || ts < 0) {
      ++log.skipped_rows;
      continue;
    }
    EventType type;
    if (f[col_type] == "view") type = EventType::view;
    else if (f[col_type] == "purchase") type = EventType::purchase;
    else {
      ++log.skipped_rows;
      continue;
    }
    log.events.push_back(Event{std::string(f[col_user]), std::string(f[col_item]), ts, type});
  }
  sort_events(log.events);
  return log;
}

EventLog load_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open events file '" + path.string() + "'");
  try {
    return parse_events(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.timestamp < b.timestamp;
  });
}

std::vector<Session> split_sessions(std::span<const Event> events, std::int64_t max_gap) {
  if (max_gap <= 0) throw Error("split_sessions: max_gap must be positive");
  std::vector<Session> sessions;
  Session current;
  bool open = false;
  auto close = [&](SessionEnd why) {
    current.ended_by = why;
    sessions.push_back(std::move(current));
    current = Session{};
    open = false;
  };
  for (const Event& e : events) {
    if (open) {
      if (e.user_id != current.user_id) {
        close(SessionEnd::end_of_log);
      } else if (e.timestamp - current.timestamps.back() > max_gap) {
        close(SessionEnd::gap);
      }
    }
    if (!open) {
      current.user_id = e.user_id;
      open = true;
    }
    current.items.push_back(e.item_id);
    current.timestamps.push_back(e.timestamp);
    if (e.type == EventType::purchase) close(SessionEnd::purchase);
  }
  if (open) close(SessionEnd::end_of_log);
  return sessions;
}

void write_events_csv(std::ostream& out, std::span<const Event> events) {
  out << "user_id,item_id,timestamp,event_type\n";
  for (const Event& e : events) {
    out << e.user_id << ',' << e.item_id << ',' << e.timestamp << ',' << to_string(e.type) << '\n';
  }
}

}  // namespace kli
