#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace erc {

// Error taxonomy mirrors the CLI exit codes: usage -> 1, data -> 2, numeric -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ull);

// Deterministic RNG. All distributions are implemented on top of raw 64-bit
// draws so streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return int((static_cast<unsigned __int128>(next_u64()) * uint64_t(n)) >> 64);
  }

  // Box-Muller, two fresh draws per sample.
  double normal(double mean = 0.0, double sd = 1.0);

  // Child stream derived from this stream's seed and a label; the parent
  // stream is not advanced. Documented derivation: fnv1a64(label, seed).
  Rng split(std::string_view label) const { return Rng(fnv1a64(label, seed_)); }
  Rng split(std::string_view label, uint64_t n) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
};

std::string lowercase_ascii(std::string_view s);

// Splits on anything that is not [a-z0-9] after ASCII lowercasing; bytes
// >= 0x80 (multibyte UTF-8) are kept as token characters.
std::vector<std::string> tokenize(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace erc
