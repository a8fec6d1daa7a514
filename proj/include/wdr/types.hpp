#ifndef WDR_TYPES_HPP
#define WDR_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace wdr {

template <class T, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using Matrix = Eigen::Matrix<T, Rows, Cols>;

template <class T, int Rows = Eigen::Dynamic>
using Vector = Matrix<T, Rows, 1>;

using Real = double;
using Vec = Vector<Real>;
using Mat = Matrix<Real>;
/// Row-major design matrix; one sample per row.
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ClassIndex = int;

/// Root of every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (corpus lines, model documents, lexicons).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Persisted artifact carries a format_version this build cannot read.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A logits provider failed to answer.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Deterministic 64-bit mixer (splitmix64). Used to derive per-item seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform index in [0, n) from a 64-bit engine. Portable across standard
/// libraries, unlike std::uniform_int_distribution.
template <class Engine>
std::size_t uniform_index(Engine& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

/// Uniform real in [0, 1) from the top 53 bits of the engine output.
template <class Engine>
double uniform_unit(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// In-place Fisher-Yates shuffle with the portable index helper.
template <class Engine, class Range>
void portable_shuffle(Range& range, Engine& rng) {
  const auto n = static_cast<std::size_t>(std::size(range));
  for (std::size_t i = n; i > 1; --i) {
    using std::swap;
    swap(range[i - 1], range[uniform_index(rng, i)]);
  }
}

}  // namespace wdr

#endif  // WDR_TYPES_HPP
