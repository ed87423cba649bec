#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dapt {

struct InvalidArgument : std::runtime_error {
  explicit InvalidArgument(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic RNG with a pinned update rule (xoshiro-free, plain
// splitmix64 + mt19937_64 would tie us to libstdc++ distributions, so the
// uniform/normal draws are hand-rolled here and never change).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t next_below(uint64_t n) {
    // modulo with rejection to stay unbiased
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // standard normal, Box-Muller (one value per call, cache the pair)
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 1e-300) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stable sub-stream derivation so independent pipeline pieces never share a
// raw seed: child = mix(seed, tag).
uint64_t derive_seed(uint64_t seed, std::string_view tag);

// In-place Fisher-Yates with our pinned Rng.
template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// ---- string helpers ----

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string_view> split_whitespace(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// ---- utf-8 ----

// Decodes the codepoint starting at byte offset i; advances i past it.
// Malformed bytes decode as U+FFFD and advance one byte.
uint32_t utf8_next(std::string_view s, size_t& i);
void utf8_append(std::string& out, uint32_t cp);
std::vector<uint32_t> utf8_decode(std::string_view s);
std::string utf8_encode(const std::vector<uint32_t>& cps);

// ---- calendar (UTC) ----

// Year and month for a unix timestamp, proleptic Gregorian, UTC.
struct YearMonth {
  int year = 0;
  int month = 0;  // 1..12
  int index() const { return year * 12 + (month - 1); }
  bool operator==(const YearMonth&) const = default;
};
YearMonth utc_year_month(int64_t unix_seconds);

// Parses "YYYY-MM". Throws InvalidArgument on malformed input.
YearMonth parse_year_month(std::string_view s);

// ---- files ----

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
// Reads a text file line by line; transparently inflates .gz files.
std::vector<std::string> read_lines(const std::string& path);

}  // namespace dapt
