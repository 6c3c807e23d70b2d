#include "delichain/common.hpp"

#include <cstdio>

namespace delichain {

char role_code(Role r) {
  switch (r) {
    case Role::Probing: return 'P';
    case Role::Causal: return 'C';
    case Role::Neither: return 'N';
  }
  return 'N';
}

Role role_from_code(std::string_view code) {
  if (code == "P") return Role::Probing;
  if (code == "C") return Role::Causal;
  if (code == "N") return Role::Neither;
  throw ValidationError("unknown intervention label '" + std::string(code) + "'");
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::Probing: return "probing";
    case Role::Causal: return "causal";
    case Role::Neither: return "neither";
  }
  return "neither";
}

std::string_view schema_name(Schema s) {
  return s == Schema::Delidata ? "delidata" : "wtd";
}

Schema schema_from_name(std::string_view name) {
  if (name == "delidata" || name == "delidata-like") return Schema::Delidata;
  if (name == "wtd" || name == "wtd-like") return Schema::Wtd;
  throw ConfigError("unknown schema '" + std::string(name) + "'");
}

std::string to_string(const MentionRef& m) {
  return m.dialogue_id + "#" + std::to_string(m.index);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// splitmix64
Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

int Rng::between(int lo, int hi) {
  return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace delichain
