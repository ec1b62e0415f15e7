#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lqo {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (e.g. simulating an incomplete plan).
struct ContractError : Error {
    using Error::Error;
};

/// A configuration value is out of range or internally inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

/// A catalog lookup failed (unknown table, column, or relation id).
struct CatalogError : Error {
    using Error::Error;
};

/// Tensor/vector dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

/// Persisted state fails validation (hash mismatch, malformed file).
struct IntegrityError : Error {
    using Error::Error;
};

#define LQO_CHECK(cond, msg)                                                   \
    do {                                                                       \
        if (!(cond)) throw ::lqo::ContractError(std::string(msg));             \
    } while (0)

/// FNV-1a 64-bit hash; used for catalog fingerprints and derived rng streams.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic xoshiro256** generator.
///
/// The standard <random> distributions are implementation-defined, so every
/// stochastic component in the project draws through this class to keep runs
/// byte-for-byte reproducible across compilers.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    uint64_t next_u64() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    uint64_t next_below(uint64_t n) {
        LQO_CHECK(n > 0, "Rng::next_below: n must be positive");
        return uint64_t((__uint128_t(next_u64()) * n) >> 64);
    }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t next_int(int64_t lo, int64_t hi) {
        LQO_CHECK(lo <= hi, "Rng::next_int: empty range");
        return lo + int64_t(next_below(uint64_t(hi - lo + 1)));
    }

    /// Standard normal via Box-Muller (one value per call; the twin is dropped
    /// so the stream position stays easy to reason about).
    double next_gaussian();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Derive an independent child stream; deterministic in (seed, tag).
    Rng fork(uint64_t tag) const {
        uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ull * (tag + 1));
        splitmix64(x);
        return Rng(x);
    }

    uint64_t seed() const { return seed_; }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_;
    uint64_t s_[4];
};

/// base64 without line wrapping; used to embed raw little-endian float64
/// buffers in JSON checkpoints.
std::string base64_encode(const void* data, size_t len);
std::vector<uint8_t> base64_decode(std::string_view text);

std::string doubles_to_base64(const std::vector<double>& v);
std::vector<double> base64_to_doubles(std::string_view text);

}  // namespace lqo
