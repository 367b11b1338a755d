#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace etk {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

/// Maps 64 random bits to the open interval (0, 1) with 53-bit resolution.
constexpr double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Random stream with platform-independent output. The standard distributions
/// are implementation-defined, so only the raw engine is used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return to_unit_open(engine_()); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Purposes for keyed random draws. Keying every draw by (purpose, entity ids)
/// gives common random numbers across policy variants of the same run.
enum class Stream : std::uint64_t {
  MaxOffers = 1,
  CenterDecision = 2,
  PatientDecision = 3,
  DualDecision = 4,
  PostTransplant = 5,
  Immunization = 6,
  Relisting = 7,
};

class RandomStreams {
 public:
  explicit RandomStreams(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  [[nodiscard]] std::uint64_t key(Stream s, std::uint64_t a, std::uint64_t b = 0) const {
    return hash_combine(hash_combine(hash_combine(seed_, static_cast<std::uint64_t>(s)), a), b);
  }
  /// Single uniform draw keyed by purpose and ids.
  [[nodiscard]] double uniform(Stream s, std::uint64_t a, std::uint64_t b = 0) const {
    return to_unit_open(mix64(key(s, a, b)));
  }
  [[nodiscard]] Rng stream(Stream s, std::uint64_t a, std::uint64_t b = 0) const {
    return Rng{key(s, a, b)};
  }

 private:
  std::uint64_t seed_;
};

/// Stable 64-bit hash of a string (FNV-1a), used to key draws by entity id.
constexpr std::uint64_t hash_id(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace etk
