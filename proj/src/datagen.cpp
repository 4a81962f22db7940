#include "molbbo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_set>
#include <utility>

#include "molbbo/gp.hpp"
#include "molbbo/parallel.hpp"
#include "molbbo/rng.hpp"

namespace molbbo {

namespace {

constexpr std::uint64_t kSequenceTag = 0x5345514cull;  // training sequences
constexpr std::uint64_t kHeldoutTag = 0x48454c44ull;   // held-out eval set

bool try_z_normalize(std::vector<double>& ys) {
  const std::size_t n = ys.size();
  if (n == 0) return false;
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double y : ys) var += (y - mean) * (y - mean);
  var /= static_cast<double>(n);
  if (!(var >= 1e-12)) return false;  // also rejects NaN
  const double sd = std::sqrt(var);
  for (double& y : ys) y = (y - mean) / sd;
  return true;
}

// First n entries of a seeded uniform permutation of [0, pool_size).
std::vector<std::size_t> draw_distinct(Rng& rng, std::size_t pool_size, std::size_t n) {
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.index(pool_size - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

TrainingSequence sample_from_split(const Pool& pool,
                                   const std::vector<DescriptorId>& split,
                                   const SamplerConfig& cfg, Rng& rng) {
  if (pool.size() == 0) throw EmptyPool("empty molecule pool");
  if (cfg.n_min < 1 || cfg.n_min > cfg.n_max) {
    throw std::invalid_argument("need 1 <= n_min <= n_max");
  }
  if (!(cfg.synthetic_ratio >= 0.0 && cfg.synthetic_ratio <= 1.0)) {
    throw std::invalid_argument("synthetic_ratio must lie in [0, 1]");
  }
  if (split.empty()) throw std::invalid_argument("empty descriptor split");

  // the function-kind decision is made exactly once per sequence, before any
  // retries, so the realized synthetic fraction stays an unbiased coin
  const bool synthetic = rng.bernoulli(cfg.synthetic_ratio);
  constexpr int kMaxAttempts = 10;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int n = static_cast<int>(rng.uniform_int(cfg.n_min, cfg.n_max));
    if (static_cast<std::size_t>(n) > pool.size()) {
      throw std::invalid_argument("sequence length exceeds pool size");
    }
    const std::vector<std::size_t> picks =
        draw_distinct(rng, pool.size(), static_cast<std::size_t>(n));
    std::vector<Fingerprint> xs;
    xs.reserve(picks.size());
    for (std::size_t i : picks) xs.push_back(pool.fingerprints[i]);

    TrainingSequence seq;
    if (synthetic) {
      const std::uint64_t prior_seed = rng.next_u64();
      seq.ys = sample_prior(xs, GpHyperparams{1.0, 0.0}, prior_seed);
      seq.source = {SequenceSource::Kind::Synthetic, DescriptorId::MolecularWeight,
                    prior_seed};
    } else {
      const DescriptorId id = split[rng.index(split.size())];
      bool defined = true;
      seq.ys.reserve(picks.size());
      for (std::size_t i : picks) {
        const double v = pool.descriptor_table[i][static_cast<std::size_t>(id)];
        if (is_undefined(v)) {
          defined = false;
          break;
        }
        seq.ys.push_back(v);
      }
      if (!defined) continue;
      seq.source = {SequenceSource::Kind::Intrinsic, id, 0};
    }
    if (!try_z_normalize(seq.ys)) continue;
    seq.xs = std::move(xs);
    return seq;
  }
  throw DegenerateFunction("no non-constant function after " +
                           std::to_string(kMaxAttempts) + " draws");
}

}  // namespace

void z_normalize(std::vector<double>& ys) {
  if (!try_z_normalize(ys)) {
    throw DegenerateFunction("cannot normalize near-constant values");
  }
}

Pool load_pool(const std::string& path, const FingerprintConfig& fp_cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Pool pool;
  std::unordered_set<Hash128, Hash128Hasher> seen;
  std::string line;
  while (std::getline(in, line)) {
    // first whitespace-separated token; the rest (e.g. a catalog id) is ignored
    std::size_t begin = line.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) continue;
    if (line[begin] == '#') continue;  // comment line
    std::size_t end = line.find_first_of(" \t\r\n", begin);
    if (end == std::string::npos) end = line.size();
    const std::string token = line.substr(begin, end - begin);
    MolecularGraph g;
    try {
      g = parse_smiles(token);
    } catch (const ParseError&) {
      ++pool.skipped_lines;
      continue;
    }
    if (!seen.insert(canonical_hash(g)).second) {
      ++pool.dropped_duplicates;
      continue;
    }
    pool.smiles.push_back(token);
    pool.molecules.push_back(std::move(g));
  }
  if (pool.molecules.empty()) {
    throw EmptyPool("no valid molecule in " + path + " (" +
                    std::to_string(pool.skipped_lines) + " lines skipped)");
  }
  pool.fingerprints.resize(pool.size());
  pool.descriptor_table.resize(pool.size());
  parallel_for(static_cast<std::int64_t>(pool.size()), [&](std::int64_t i) {
    pool.fingerprints[static_cast<std::size_t>(i)] =
        morgan_fingerprint(pool.molecules[static_cast<std::size_t>(i)], fp_cfg);
    pool.descriptor_table[static_cast<std::size_t>(i)] =
        compute_all(pool.molecules[static_cast<std::size_t>(i)]);
  });
  return pool;
}

// ------------------------------------------------------------------ caching

namespace {

constexpr char kCacheMagic[4] = {'M', 'B', 'P', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

void put_u32(std::ostream& out, std::uint32_t x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}
void put_u64(std::ostream& out, std::uint64_t x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}
void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!in) throw std::runtime_error("truncated pool cache");
  return x;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!in) throw std::runtime_error("truncated pool cache");
  return x;
}
std::string get_string(std::istream& in, std::uint32_t max_len) {
  const std::uint32_t len = get_u32(in);
  if (len > max_len) throw std::runtime_error("oversized field in pool cache");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("truncated pool cache");
  return s;
}

}  // namespace

void save_pool_cache(const Pool& pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kCacheMagic, sizeof kCacheMagic);
  put_u32(out, kCacheVersion);
  const int nbits = pool.fingerprints.empty() ? 0 : pool.fingerprints.front().nbits;
  put_u32(out, static_cast<std::uint32_t>(nbits));
  put_u32(out, static_cast<std::uint32_t>(kNumDescriptors));
  put_u32(out, static_cast<std::uint32_t>(pool.skipped_lines));
  put_u32(out, static_cast<std::uint32_t>(pool.dropped_duplicates));
  put_u64(out, pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    put_string(out, pool.smiles[i]);
    const Hash128 h = canonical_hash(pool.molecules[i]);
    put_u64(out, h.hi);
    put_u64(out, h.lo);
    put_string(out, fingerprint_to_hex(pool.fingerprints[i]));
    out.write(reinterpret_cast<const char*>(pool.descriptor_table[i].data()),
              static_cast<std::streamsize>(kNumDescriptors * sizeof(double)));
  }
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

Pool load_pool_cache(const std::string& path, const FingerprintConfig& fp_cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof kCacheMagic) != 0) {
    throw std::runtime_error("not a pool cache: bad magic");
  }
  if (get_u32(in) != kCacheVersion) {
    throw std::runtime_error("unsupported pool cache version");
  }
  if (get_u32(in) != static_cast<std::uint32_t>(fp_cfg.nbits)) {
    throw std::runtime_error("pool cache fingerprint width mismatch");
  }
  if (get_u32(in) != static_cast<std::uint32_t>(kNumDescriptors)) {
    throw std::runtime_error("pool cache descriptor set mismatch");
  }
  Pool pool;
  pool.skipped_lines = static_cast<int>(get_u32(in));
  pool.dropped_duplicates = static_cast<int>(get_u32(in));
  const std::uint64_t count = get_u64(in);
  if (count == 0) throw EmptyPool("pool cache holds no molecules");
  if (count > (1ull << 32)) throw std::runtime_error("implausible pool cache size");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string token = get_string(in, 4096);
    // braced init evaluates left to right: hi was written first
    const Hash128 stored{get_u64(in), get_u64(in)};
    MolecularGraph g;
    try {
      g = parse_smiles(token);
    } catch (const ParseError& e) {
      throw std::runtime_error("pool cache entry no longer parses: " +
                               std::string(e.what()));
    }
    if (!(canonical_hash(g) == stored)) {
      throw std::runtime_error("pool cache hash mismatch for " + token);
    }
    Fingerprint fp = fingerprint_from_hex(get_string(in, 4096));
    if (fp.nbits != fp_cfg.nbits) {
      throw std::runtime_error("pool cache fingerprint width mismatch");
    }
    std::vector<double> row(kNumDescriptors);
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(kNumDescriptors * sizeof(double)));
    if (!in) throw std::runtime_error("truncated pool cache");
    pool.smiles.push_back(token);
    pool.molecules.push_back(std::move(g));
    pool.fingerprints.push_back(std::move(fp));
    pool.descriptor_table.push_back(std::move(row));
  }
  return pool;
}

// ----------------------------------------------------------------- sampling

TrainingSequence sample_sequence(const Pool& pool, const DescriptorRegistry& registry,
                                 const SamplerConfig& cfg, std::uint64_t step_seed) {
  Rng rng(derive_seed(cfg.seed, kSequenceTag, step_seed));
  return sample_from_split(pool, registry.train_split(), cfg, rng);
}

std::vector<TrainingSequence> heldout_eval_set(const Pool& pool,
                                               const DescriptorRegistry& registry,
                                               const SamplerConfig& cfg, int count) {
  if (count < 0) throw std::invalid_argument("negative count");
  std::vector<TrainingSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Rng rng(derive_seed(cfg.seed, kHeldoutTag, static_cast<std::uint64_t>(k)));
    out.push_back(sample_from_split(pool, registry.heldout_split(), cfg, rng));
  }
  return out;
}

}  // namespace molbbo
