// Semi-synthetic training data for the in-context surrogate: an immutable
// molecule pool loaded from a SMILES file (fingerprints and descriptors
// precomputed), and a deterministic sampler that draws (fingerprint, value)
// sequences from either an intrinsic molecular descriptor or a fresh
// Tanimoto-GP prior function, z-normalizing the values of every sequence.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "molbbo/descriptors.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/molgraph.hpp"

namespace molbbo {

class EmptyPool : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DegenerateFunction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Pool {
  std::vector<std::string> smiles;       // the accepted input token per molecule
  std::vector<MolecularGraph> molecules;
  std::vector<Fingerprint> fingerprints;
  // one row per molecule, all descriptors in id order; undefined entries hold
  // the descriptor NaN sentinel
  std::vector<std::vector<double>> descriptor_table;
  int skipped_lines = 0;        // unparseable lines in the source file
  int dropped_duplicates = 0;   // valid lines whose molecule was already present

  std::size_t size() const { return molecules.size(); }
};

// Reads one molecule per line (anything after whitespace, e.g. a catalog id,
// is ignored).  Unparseable lines are counted in skipped_lines; duplicate
// molecules (by canonical hash) in dropped_duplicates.  Throws EmptyPool if
// nothing parses.
Pool load_pool(const std::string& path, const FingerprintConfig& fp_cfg = {});

// Versioned binary cache of the derived pool data; loading re-parses the
// stored SMILES but trusts cached fingerprints and descriptors.  Loading
// verifies the fingerprint configuration and per-molecule canonical hashes
// and throws std::runtime_error on any mismatch or corruption.
void save_pool_cache(const Pool& pool, const std::string& path);
Pool load_pool_cache(const std::string& path, const FingerprintConfig& fp_cfg = {});

struct SamplerConfig {
  double synthetic_ratio = 0.1;  // probability of a GP-prior function
  int n_min = 16;                // sequence length bounds, inclusive
  int n_max = 128;               // must not exceed the surrogate's max_pairs
  std::uint64_t seed = 0;
};

struct SequenceSource {
  enum class Kind { Intrinsic, Synthetic };
  Kind kind = Kind::Intrinsic;
  DescriptorId descriptor = DescriptorId::MolecularWeight;  // when Intrinsic
  std::uint64_t seed = 0;                                   // when Synthetic
};

struct TrainingSequence {
  std::vector<Fingerprint> xs;
  std::vector<double> ys;  // z-normalized: mean 0, population std 1
  SequenceSource source;
};

// One training sequence: n ~ U[n_min, n_max] distinct molecules, values from
// a training-split descriptor (else a GP prior draw, with probability
// synthetic_ratio), z-normalized.  Deterministic in (cfg.seed, step_seed).
// Degenerate draws (constant values or an undefined descriptor) are retried
// up to 10 times, then DegenerateFunction is thrown.
TrainingSequence sample_sequence(const Pool& pool, const DescriptorRegistry& registry,
                                 const SamplerConfig& cfg, std::uint64_t step_seed);

// A fixed evaluation set drawn only from held-out descriptors (and synthetic
// seeds from a stream disjoint from training's).  Deterministic in cfg.seed.
std::vector<TrainingSequence> heldout_eval_set(const Pool& pool,
                                               const DescriptorRegistry& registry,
                                               const SamplerConfig& cfg, int count);

// In-place z-normalization: subtract the mean, divide by the population
// standard deviation.  Throws DegenerateFunction when variance < 1e-12.
void z_normalize(std::vector<double>& ys);

}  // namespace molbbo
