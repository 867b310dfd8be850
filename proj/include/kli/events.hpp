#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace kli {

enum class EventType { view, purchase };

struct Event {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;  // epoch seconds
  EventType type = EventType::view;

  bool operator==(const Event&) const = default;
};

enum class SessionEnd { gap, purchase, end_of_log };

// One user's consecutive events pursuing a single goal.
struct Session {
  std::string user_id;
  std::vector<std::string> items;
  std::vector<std::int64_t> timestamps;
  SessionEnd ended_by = SessionEnd::end_of_log;

  std::size_t size() const { return items.size(); }
  bool operator==(const Session&) const = default;
};

struct EventLog {
  std::vector<Event> events;
  std::size_t skipped_rows = 0;
};

inline constexpr std::int64_t kDefaultMaxGapSeconds = 1800;

// Reads `user_id,item_id,timestamp,event_type` CSV with a header row.
// Malformed rows and event types outside {view, purchase} are skipped and
// counted. Output is stably sorted by (user_id, timestamp).
EventLog parse_events(std::istream& in);
EventLog load_events(const std::filesystem::path& path);

void sort_events(std::vector<Event>& events);

// Expects events sorted as produced by load_events. A new session starts when
// the user changes, when the gap to the previous event exceeds max_gap, or
// after a purchase (which closes its session).
std::vector<Session> split_sessions(std::span<const Event> events,
                                    std::int64_t max_gap = kDefaultMaxGapSeconds);

void write_events_csv(std::ostream& out, std::span<const Event> events);

const char* to_string(EventType type);
const char* to_string(SessionEnd end);

}  // namespace kli
