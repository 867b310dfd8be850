#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kli::cli {

// Bad flags, config keys or config values. Exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct Config {
  double alpha = 0.5;
  std::map<std::string, double> alpha_overrides;
  double significance = 0.05;
  std::size_t n_samples = 20000;
  std::size_t M_max = 50;
  std::int64_t max_gap_seconds = 1800;
  std::size_t N = 10;
  double smoothing_epsilon = 1e-6;
  std::uint64_t seed = 42;
  unsigned threads = 0;
  std::size_t candidates = 0;
  std::map<std::string, double> epsilon_overrides;

  // Strict: unknown keys and out-of-range values raise UsageError.
  static Config from_json(std::string_view text);
  static Config load(const std::string& path);
  std::string to_json() const;
  void validate() const;
};

// Runs one CLI invocation. Returns the process exit code: 0 success, 1 usage
// error, 2 data error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kli::cli
