#pragma once
// Iterative molecular black-box optimization.  A graph GA (non-ring
// single-bond crossover plus four local mutations) proposes candidates from
// the best observed molecules, a pluggable surrogate (in-context transformer,
// Tanimoto GP, or none) predicts their scores, UCB acquisition picks a batch,
// and the objective is evaluated under an exact call budget.  Trajectories
// are summarized with AUC-top-k metrics.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "molbbo/datagen.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/icl.hpp"
#include "molbbo/molgraph.hpp"
#include "molbbo/objectives.hpp"
#include "molbbo/rng.hpp"

namespace molbbo {

// The run cannot reach its budget with distinct molecules (pool and GA both
// exhausted).
class PoolExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// More than half of one evaluation batch came back undefined.
class UndefinedStorm : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Observations.

struct ObservedEntry {
  MolecularGraph mol;
  Fingerprint fp;
  double score = 0.0;
  Hash128 hash;
};

// Evaluation history in evaluation order, deduplicated by canonical hash.
class ObservedDataset {
 public:
  bool contains(const Hash128& h) const { return seen_.count(h) != 0; }

  // Throws std::invalid_argument when the molecule was already observed.
  void append(MolecularGraph mol, Fingerprint fp, double score);

  const std::vector<ObservedEntry>& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size()); }

 private:
  std::vector<ObservedEntry> entries_;
  std::unordered_set<Hash128, Hash128Hasher> seen_;
};

// ---------------------------------------------------------------------------
// Configuration.

struct SampledBeta {};  // beta = 10^b, b ~ U[-0.5, 1.5], redrawn once per iteration
struct FixedBeta {
  double beta = 1.0;
};
using BetaMode = std::variant<SampledBeta, FixedBeta>;

struct RunConfig {
  int budget = 1000;     // total objective evaluations, init included
  int batch_k = 15;      // evaluations per iteration
  int pool_size = 100;   // GA candidates per iteration (C)
  int init_size = 34;    // initial random population
  int parents = 34;      // elite count for GA parent sampling
  double mutation_rate = 0.01;  // per-offspring mutation probability
  BetaMode beta_mode;           // defaults to SampledBeta
  std::uint64_t seed = 0;
  FingerprintConfig fp_config;  // candidate fingerprinting; must match the pool
  bool sort_context = false;    // ICL only: sort the context window by score
};

// ---------------------------------------------------------------------------
// Surrogates.

struct RandomSurrogate {};   // k fresh random pool molecules per iteration
struct GraphGaSurrogate {};  // k fresh GA children per iteration, no model
struct GpSurrogate {};       // Tanimoto GP; hyperparameters fit on the initial population
struct IclSurrogate {
  const Parameters* model = nullptr;  // borrowed trained checkpoint
};
using Surrogate = std::variant<RandomSurrogate, GraphGaSurrogate, GpSurrogate, IclSurrogate>;

// "random", "graph_ga", "gp", "icl".
std::string surrogate_kind(const Surrogate& s);

// ---------------------------------------------------------------------------
// Graph GA edit primitives.

// Cuts one uniformly chosen non-ring single bond in each parent and joins one
// fragment from each with a new single bond at the cut sites.  Absent when a
// parent has no cuttable bond or no valid child emerged within the retry cap.
std::optional<MolecularGraph> crossover(const MolecularGraph& p1, const MolecularGraph& p2,
                                        Rng& rng);

enum class MutationKind : int {
  ElementSwap = 0,      // random atom becomes a different element of {C,N,O,F,S,Cl,Br}
  BondOrderChange = 1,  // random non-aromatic bond gets a different order
  AtomAppend = 2,       // new terminal atom attached by a single bond
  AtomDelete = 3,       // random terminal atom removed
};

// One attempt of the given edit; absent when the edit does not apply or the
// result fails validation.
std::optional<MolecularGraph> mutate_with_kind(const MolecularGraph& g, MutationKind kind,
                                               Rng& rng);

// Uniformly chooses an edit kind per attempt; absent after bounded retries.
std::optional<MolecularGraph> mutate(const MolecularGraph& g, Rng& rng);

// ---------------------------------------------------------------------------
// Candidate generation.

struct Candidate {
  MolecularGraph mol;
  Fingerprint fp;
  Hash128 hash;
  bool fallback = false;  // injected from the pool after a GA shortfall
};

// Breeds up to `target` (default cfg.pool_size) novel candidates from the top
// cfg.parents observations: parents are sampled rank-proportionally
// (weight = parents - rank + 1), crossed over, and mutated with probability
// cfg.mutation_rate; duplicates of observations or batch-mates are discarded.
// Stops early at target * 50 attempts.  Requires at least 2 observations.
std::vector<Candidate> generate_candidates(const ObservedDataset& obs, const RunConfig& cfg,
                                           std::uint64_t iter_seed, int target = -1);

// ---------------------------------------------------------------------------
// Acquisition.

// mean + beta * std.
double ucb(double mean, double std, double beta);

// 10^b with b ~ U[-0.5, 1.5]: beta in [10^-0.5, 10^1.5] ~= [0.316, 31.6].
double sample_beta(Rng& rng);

// Indices of the k highest UCB scores, in descending score order; ties break
// toward the lower index.  Requires k <= mean.size() == std.size().
std::vector<int> select_top_ucb(const std::vector<double>& mean,
                                const std::vector<double>& std_dev, double beta, int k);

// ---------------------------------------------------------------------------
// Metrics.

// (1/B) * sum over t = 1..B of the mean of the top min(k, t) scores among the
// first t entries.  Lands in [0,1] for scores in [0,1].
double auc_topk(const std::vector<double>& trajectory, int k);

// ---------------------------------------------------------------------------
// The optimization loop.

using ObjectiveFn = std::function<EvalResult(const MolecularGraph&)>;

struct IterationLog {
  int iteration = 0;  // 0-based, counted after the initial population
  double beta = 0.0;  // 0 when no acquisition step ran (random / graph GA)
  int n_candidates = 0;
  int n_fallback = 0;             // pool molecules injected after a GA shortfall
  std::vector<double> pred_mean;  // per candidate, denormalized; empty without a model
  std::vector<double> pred_std;
  std::vector<int> selected;      // candidate indices in evaluation order
  std::vector<double> scores;     // raw objective values in evaluation order
};

struct RunResult {
  std::vector<double> trajectory;  // raw scores in evaluation order, length = budget
  double auc_top1 = 0.0;
  double auc_top10 = 0.0;
  double auc_top100 = 0.0;
  double best_score = 0.0;
  std::string best_smiles;
  int undefined_evals = 0;
  int fallback_total = 0;
  std::vector<IterationLog> iterations;
};

// Runs the full loop: evaluate init_size distinct random pool molecules, then
// iterate candidate generation -> z-scored surrogate prediction ->
// denormalization -> UCB top-k selection -> evaluation, until exactly
// cfg.budget objective calls have been spent (the last batch truncates).
// Deterministic per cfg.seed.  Throws std::invalid_argument on bad configs,
// PoolExhausted when distinct molecules run out, UndefinedStorm when more
// than half of one batch is undefined.
RunResult run_optimization(const ObjectiveFn& objective, const Surrogate& surrogate,
                           const Pool& pool, const RunConfig& cfg);

// Full structured log (trajectory, metrics, per-iteration details).
std::string to_json(const RunResult& r);

// Flat per-call table: call index, raw score, running top-1/10/100 means.
std::string trajectory_csv(const RunResult& r);

}  // namespace molbbo
