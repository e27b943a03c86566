#pragma once

/**
 * common.hpp - shared error types, hashing, and RNG helpers.
 *
 * Everything downstream assumes double precision and the deterministic
 * uniform draw defined here. Seeds derived from run metadata go through
 * derive_seed so results are stable across platforms and worker counts.
 */

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace declab {

// ============================================================
// Errors
// ============================================================

/** Caller passed an out-of-range or malformed argument. */
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** Input data (file, corpus, dataset line) failed validation. */
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** A model could not answer a query (missing table row, bad state). */
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ============================================================
// Hashing
// ============================================================

/** 64-bit FNV-1a over a byte string. */
inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/** splitmix64 finisher, used to avalanche short structured inputs. */
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/**
 * Stable per-sample seed from run metadata. Identical inputs give the
 * identical seed on every platform, which keeps harness outputs
 * byte-reproducible regardless of scheduling.
 */
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view prompt_id,
                                 std::string_view decoder, std::uint64_t sample_index) {
  std::uint64_t h = fnv1a64(prompt_id);
  h = fnv1a64("|", h);
  h = fnv1a64(decoder, h);
  return mix64(h ^ mix64(master) ^ mix64(sample_index * 0x9e3779b97f4a7c15ull + 1));
}

// ============================================================
// RNG
// ============================================================

/**
 * Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
 * Bit-exact across standard libraries, unlike uniform_real_distribution.
 */
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace declab
