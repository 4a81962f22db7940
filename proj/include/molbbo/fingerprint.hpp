#pragma once
// Circular (Morgan-style) binary fingerprints — the model input x — and
// Tanimoto similarity over them.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "molbbo/molgraph.hpp"

namespace molbbo {

struct FingerprintConfig {
  int radius = 2;
  int nbits = 2048;  // power of two, >= 64
};

class WidthMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Fingerprint {
  int nbits = 0;
  int popcount = 0;
  std::vector<std::uint64_t> words;  // nbits/64 words, bit i = word i/64, bit i%64

  bool test(int bit) const {
    return (words[static_cast<std::size_t>(bit) / 64] >> (static_cast<std::size_t>(bit) % 64)) & 1u;
  }
  void set(int bit) {
    std::uint64_t& w = words[static_cast<std::size_t>(bit) / 64];
    const std::uint64_t mask = 1ull << (static_cast<std::size_t>(bit) % 64);
    if (!(w & mask)) {
      w |= mask;
      ++popcount;
    }
  }
  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

// Empty fingerprint of the configured width.
Fingerprint make_fingerprint(const FingerprintConfig& cfg);

// Fingerprint with the given bit positions set (test/config helper).
Fingerprint fingerprint_from_bits(const std::vector<int>& bits, int nbits);

// Hash atom environments at radii 0..cfg.radius into bit positions. The
// environment hash is the fixed 64-bit mixing function used across this
// codebase (not a platform hash); bit position = hash mod nbits; duplicate
// environments set their bit once (binary fingerprint).
Fingerprint morgan_fingerprint(const MolecularGraph& g, const FingerprintConfig& cfg = {});

// (a.b) / (|a|^2 + |b|^2 - a.b) over bits; 0 when both are empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// Lowercase hex serialization, nbits/4 chars, word 0 first, low nibble first.
std::string fingerprint_to_hex(const Fingerprint& fp);
Fingerprint fingerprint_from_hex(const std::string& hex);

}  // namespace molbbo
