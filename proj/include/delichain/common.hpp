#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace delichain {

// Error hierarchy. The CLI maps each family onto a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Data that violates a structural invariant (corpus, clustering, graph).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ServiceError : public Error {
 public:
  using Error::Error;
};

enum class Role { Probing, Causal, Neither };

char role_code(Role r);
Role role_from_code(std::string_view code);  // throws ValidationError
std::string_view role_name(Role r);

// Entity schema of the collaborative task a dialogue comes from.
enum class Schema { Delidata, Wtd };

std::string_view schema_name(Schema s);
Schema schema_from_name(std::string_view name);  // throws ConfigError

// An utterance position inside a named dialogue.
struct MentionRef {
  std::string dialogue_id;
  int index = 0;

  auto operator<=>(const MentionRef&) const = default;
  bool operator==(const MentionRef&) const = default;
};

std::string to_string(const MentionRef& m);

// 64-bit FNV-1a. Stable across platforms; used for feature hashing and
// content fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v);

// Portable seeded generator helpers. std::*_distribution output differs
// between standard libraries, so the few draws we need are done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::uint64_t below(std::uint64_t n);     // [0, n), n > 0
  int between(int lo, int hi);              // [lo, hi] inclusive
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

std::string trim(std::string_view s);

}  // namespace delichain
