#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pae {

/// Raised when a caller violates a documented precondition (bad config,
/// out-of-range rates, unknown ids).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Seed derivation. Every stochastic decision in the system draws from a seed
// built by folding its coordinates (iteration, episode, step, ...) into the
// master seed, so results never depend on thread scheduling.
uint64_t mix_seed(uint64_t seed, uint64_t value);

template <typename... Rest>
uint64_t derive_seed(uint64_t seed, Rest... rest) {
  ((seed = mix_seed(seed, static_cast<uint64_t>(rest))), ...);
  return seed;
}

uint64_t hash_string(std::string_view text);

/// mt19937_64 wrapped with portable uniform draws (the <random> distributions
/// are implementation-defined, which would break cross-platform replay).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);

/// Lowercases and drops every character that is not alphanumeric or
/// whitespace, then collapses whitespace runs.
std::string normalize_text(std::string_view text);

/// Lowercase alphanumeric tokens in order of appearance.
std::vector<std::string> tokenize(std::string_view text);

/// tokenize() minus function words; used as task keywords.
std::vector<std::string> keywords(std::string_view text);

bool is_stopword(std::string_view token);

bool iequals(std::string_view a, std::string_view b);

}  // namespace pae
