// Benchmark sweeps: a declarative config (objectives x methods x seeds) is
// expanded into independent optimization runs whose results aggregate into a
// mean +/- std score table and a per-method mean-rank summary.
//
// Sweep configs are JSON.  Top-level keys:
//   objectives   required non-empty array of objective configs (the
//                load_objective schema) plus an optional "name" used for row
//                labels and run filenames (default obj<index>)
//   methods      required non-empty array; each entry a kind string
//                ("random" | "graph_ga"/"graph-ga" | "gp" | "icl") or an
//                object {"kind": .., "name": .., "checkpoint": ..}; icl
//                methods must name a checkpoint file
//   seeds        array of run seed entries, or "n_seeds": N for 0..N-1;
//                default 0..4
//   seed         sweep master seed (default 0)
//   run          per-run settings: budget, batch_k, pool_size, init_size,
//                parents, mutation_rate, sort_context, beta (a number pins a
//                fixed acquisition beta; absent means sampled per iteration),
//                fingerprint {radius, nbits}
//   pool         pool cache path (a --pool flag may override or supply it)
//   output_dir   artifact directory (a --out flag may override or supply it)
//
// Runs execute in parallel across (objective, method, seed) triples; every
// triple derives its own RunConfig seed from (sweep seed, objective index,
// method index, seed entry), so results are independent of scheduling.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molbbo/datagen.hpp"
#include "molbbo/optimize.hpp"

namespace molbbo {

struct ObjectiveSpec {
  std::string name;  // row label / filename stem, [A-Za-z0-9_.-]+
  std::string json;  // full objective config text for load_objective
};

struct MethodSpec {
  std::string name;        // row label / filename stem, default = kind
  std::string kind;        // "random" | "graph_ga" | "gp" | "icl"
  std::string checkpoint;  // icl only: trained parameter file
};

struct BenchmarkConfig {
  std::vector<ObjectiveSpec> objectives;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  RunConfig run;           // the per-triple seed field is derived, not read
  std::string pool;        // may be empty when supplied via CLI flag
  std::string output_dir;  // may be empty when supplied via CLI flag
  std::uint64_t seed = 0;
};

// Parses and validates a sweep config; throws std::invalid_argument on
// malformed JSON, empty objectives/methods/seeds, unknown method kinds, an
// icl method without a checkpoint, or duplicate/unsafe names.
BenchmarkConfig parse_benchmark_config(const std::string& json_text);

// Runs every (objective, method, seed) triple and returns results indexed
// objective-major, then method, then seed entry.  ICL checkpoints are loaded
// once up front (FormatError/VersionMismatch propagate before any run
// starts).  Triples run OpenMP-parallel; the failure of the lowest-index
// triple is rethrown after the region, so errors are deterministic too.
std::vector<RunResult> run_sweep(const Pool& pool, const BenchmarkConfig& cfg);

// Fractional-rank summary of a score table (rows = objectives, columns =
// methods, higher scores better): per row the best column gets rank 1 and
// ties share the average of their positions; returns the per-column mean
// over rows.  Throws std::invalid_argument on an empty or ragged table.
std::vector<double> mean_ranks(const std::vector<std::vector<double>>& scores);

// Per-(objective, method) mean of AUC top-10 across seeds, the sweep's
// headline metric; rows follow cfg.objectives, columns cfg.methods.
std::vector<std::vector<double>> mean_auc10_table(const BenchmarkConfig& cfg,
                                                  const std::vector<RunResult>& results);

// One row per objective x method: seed count, mean and population std of
// AUC top-1/10/100, and the mean best score.
std::string aggregate_csv(const BenchmarkConfig& cfg,
                          const std::vector<RunResult>& results);

// Per-method mean rank by mean AUC top-10 (rank 1 = best).
std::string rank_csv(const BenchmarkConfig& cfg,
                     const std::vector<RunResult>& results);

}  // namespace molbbo
