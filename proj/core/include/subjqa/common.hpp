#ifndef SUBJQA_COMMON_HPP_
#define SUBJQA_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace subjqa {

enum class ErrorKind {
  kInput,       // missing or unreadable input, malformed file
  kParameter,   // argument violates an operation precondition
  kNumerical,   // non-finite value during optimization
  kIntegrity,   // stored data disagrees with itself
  kConfig,      // invalid configuration
  kEmptyMatrix, // filtering left nothing to factorize
  kMissingStage,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by iterative solvers; `index` is the iteration or step that
// produced the first non-finite value.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& where, long index)
      : Error(ErrorKind::kNumerical,
              "non-finite value in " + where + " at index " +
                  std::to_string(index)),
        where_(where),
        index_(index) {}
  const std::string& where() const noexcept { return where_; }
  long index() const noexcept { return index_; }

 private:
  std::string where_;
  long index_;
};

// Seeded generator with distribution code pinned here instead of relying
// on the implementation-defined std:: distributions, so that a seed
// reproduces the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // (0, 1]
  double uniform_open_closed() { return 1.0 - uniform(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a salt.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);

}  // namespace subjqa

#endif  // SUBJQA_COMMON_HPP_
