#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rrl {

/// Deterministic RNG stream. Thin wrapper so every component that needs
/// randomness takes an explicit, seedable stream instead of global state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  /// Derive an independent child stream; used to keep e.g. parameter
  /// initialization and dropout decoupled under a single run seed.
  RngStream fork(std::uint64_t salt) {
    return RngStream(engine_() ^ (salt * 0x9e3779b97f4a7c15ull));
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string to_lower(std::string s);

/// 64-bit FNV-1a over a byte string. The hex form is used for config
/// fingerprints and artifact manifests.
std::uint64_t fnv1a(const std::string& bytes);
std::string fnv1a_hex(const std::string& bytes);

std::optional<std::string> env_var(const std::string& name);

/// Parses component keys of the form "name:k1=v1:k2=v2:...". The first
/// segment selects the implementation; the remaining segments are options.
struct ComponentKey {
  std::string name;
  std::vector<std::pair<std::string, std::string>> options;

  static ComponentKey parse(const std::string& key);
  std::string option_or(const std::string& k, const std::string& fallback) const;
  long option_long(const std::string& k, long fallback) const;
};

}  // namespace rrl
