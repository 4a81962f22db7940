#include "molbbo/fingerprint.hpp"

#include <algorithm>
#include <bit>

namespace molbbo {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
}

}  // namespace

Fingerprint make_fingerprint(const FingerprintConfig& cfg) {
  Fingerprint fp;
  fp.nbits = cfg.nbits;
  fp.words.assign(static_cast<std::size_t>(cfg.nbits) / 64, 0);
  return fp;
}

Fingerprint fingerprint_from_bits(const std::vector<int>& bits, int nbits) {
  FingerprintConfig cfg;
  cfg.nbits = nbits;
  Fingerprint fp = make_fingerprint(cfg);
  for (int b : bits) fp.set(b);
  return fp;
}

Fingerprint morgan_fingerprint(const MolecularGraph& g, const FingerprintConfig& cfg) {
  Fingerprint fp = make_fingerprint(cfg);
  const int n = g.n_atoms();
  const std::uint64_t mask = static_cast<std::uint64_t>(cfg.nbits) - 1;  // nbits is a power of two

  // radius-0 invariant: (element ordinal, heavy degree, total H, formal
  // charge, aromatic flag, in-ring flag)
  std::vector<std::uint64_t> inv(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atoms[static_cast<std::size_t>(i)];
    bool in_ring = false;
    for (int bi : g.adj_bonds[static_cast<std::size_t>(i)]) {
      in_ring = in_ring || g.bonds[static_cast<std::size_t>(bi)].in_ring;
    }
    std::uint64_t h = combine(0x45435f4650ull, static_cast<std::uint64_t>(a.element));
    h = combine(h, static_cast<std::uint64_t>(g.degree(i)));
    h = combine(h, static_cast<std::uint64_t>(g.total_h(i)));
    h = combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
    h = combine(h, a.aromatic ? 1u : 0u);
    h = combine(h, in_ring ? 1u : 0u);
    inv[static_cast<std::size_t>(i)] = h;
    fp.set(static_cast<int>(h & mask));
  }

  std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
  for (int r = 1; r <= cfg.radius; ++r) {
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      std::vector<std::uint64_t> nbrs;
      nbrs.reserve(g.adjacency[u].size());
      for (std::size_t e = 0; e < g.adjacency[u].size(); ++e) {
        const int v = g.adjacency[u][e];
        const int bi = g.adj_bonds[u][e];
        const auto order_code =
            static_cast<std::uint64_t>(twice_order(g.bonds[static_cast<std::size_t>(bi)].order));
        nbrs.push_back(combine(order_code, inv[static_cast<std::size_t>(v)]));
      }
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t h = combine(inv[u], static_cast<std::uint64_t>(r));
      for (std::uint64_t x : nbrs) h = combine(h, x);
      next[u] = h;
      fp.set(static_cast<int>(h & mask));
    }
    std::swap(inv, next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits != b.nbits) throw WidthMismatch("fingerprint widths differ");
  int dot = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    dot += std::popcount(a.words[i] & b.words[i]);
  }
  const int denom = a.popcount + b.popcount - dot;
  if (denom == 0) return 0.0;
  return static_cast<double>(dot) / static_cast<double>(denom);
}

std::string fingerprint_to_hex(const Fingerprint& fp) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(fp.nbits) / 4);
  for (std::uint64_t w : fp.words) {
    for (int nib = 0; nib < 16; ++nib) {
      out.push_back(digits[(w >> (4 * nib)) & 0xf]);
    }
  }
  return out;
}

Fingerprint fingerprint_from_hex(const std::string& hex) {
  Fingerprint fp;
  fp.nbits = static_cast<int>(hex.size()) * 4;
  fp.words.assign(hex.size() / 16, 0);
  if (hex.size() % 16 != 0) throw std::runtime_error("hex fingerprint length must be a multiple of 16");
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const char c = hex[i];
    std::uint64_t v;
    if (c >= '0' && c <= '9') {
      v = static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v = static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw std::runtime_error("bad hex digit in fingerprint");
    }
    fp.words[i / 16] |= v << (4 * (i % 16));
  }
  for (std::uint64_t w : fp.words) fp.popcount += std::popcount(w);
  return fp;
}

}  // namespace molbbo
