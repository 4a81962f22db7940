#pragma once
// Black-box molecular objectives, all scoring in [0, 1]: fingerprint
// similarity to a target molecule, molecular-formula (isomer) matching,
// multi-property composites, logistic targets on held-out descriptors, and
// deterministic synthetic RKHS oracles calibrated on a molecule pool.
//
// Every objective is an immutable value type; evaluate() is a pure function
// of the molecular graph, so any SMILES spelling of the same molecule scores
// identically and concurrent evaluation is safe.  Budget accounting goes
// through CountingEvaluator, which is deliberately not thread-safe (callers
// serialize it).

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "molbbo/datagen.hpp"
#include "molbbo/descriptors.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/molgraph.hpp"

namespace molbbo {

// ---------------------------------------------------------------------------
// Value modifiers: map a raw property value into (0, 1].

// exp(-(v - mu)^2 / (2 sigma^2)); peaks at exactly 1 when v == mu.
// Requires sigma > 0.
struct GaussianModifier {
  double mu = 0.0;
  double sigma = 1.0;
};

// 1 / (1 + exp(-(v - midpoint) / scale)); 0.5 at the midpoint, increasing for
// scale > 0.  Requires scale != 0; a negative scale flips the direction.
struct LogisticModifier {
  double midpoint = 0.0;
  double scale = 1.0;
};

using Modifier = std::variant<GaussianModifier, LogisticModifier>;

// Applies the modifier to a raw value.  Throws std::invalid_argument when the
// modifier constants violate their invariants (sigma <= 0, scale == 0).
double apply_modifier(const Modifier& m, double v);

// ---------------------------------------------------------------------------
// Objective variants.

// Tanimoto similarity between the candidate's fingerprint and a fixed target
// fingerprint (rediscovery-style task).
struct SimilarityObjective {
  Fingerprint target;
  FingerprintConfig fp_config;  // how candidates are fingerprinted
};

// Molecular-formula match.  Tracked elements are exactly those named in the
// target formula plus carbon; each contributes a unit Gaussian on its count
// error and the score is the geometric mean of those terms, multiplied by a
// unit Gaussian on the heavy-atom-count error so untracked elements cannot be
// added for free.  Hydrogen is tracked only when the formula names it and
// never contributes to the heavy-atom term.
struct IsomerObjective {
  std::vector<Elem> tracked;       // unique; always contains Elem::C
  std::vector<int> target_counts;  // parallel to tracked
  int target_heavy = 0;            // heavy-atom count implied by the formula
};

struct MpoTerm {
  DescriptorId descriptor = DescriptorId::MolecularWeight;
  Modifier modifier;
};

// Multi-property objective: geometric mean of the modifier outputs, one per
// descriptor term.  Zero whenever any term is zero; equal to the single term
// when there is exactly one.
struct MpoObjective {
  std::vector<MpoTerm> terms;
};

// Logistic squash of one descriptor: 1 / (1 + exp(-(v - midpoint) / scale)).
// Intended for descriptors from the held-out split so the optimization target
// is never a function the surrogate trained on.
struct HeldOutDescriptorObjective {
  DescriptorId descriptor = DescriptorId::BalabanJ;
  double midpoint = 0.0;
  double scale = 1.0;  // != 0
};

// Deterministic synthetic oracle: s(g) = sum_j weights[j] *
// tanimoto(fp(g), anchors[j]), reported as (s - s_min) / s_range clamped to
// [0, 1].  s_min / s_range are frozen at construction so that the calibration
// pool's scores span exactly [0, 1]; molecules outside the pool clamp.
struct RkhsSyntheticObjective {
  std::vector<Fingerprint> anchors;
  std::vector<double> weights;  // parallel to anchors
  double s_min = 0.0;
  double s_range = 1.0;  // 0 marks a degenerate calibration: score is 0.5
  FingerprintConfig fp_config;
};

using Objective = std::variant<SimilarityObjective, IsomerObjective, MpoObjective,
                               HeldOutDescriptorObjective, RkhsSyntheticObjective>;

// Stable variant name used in config files and logs: "similarity", "isomer",
// "mpo", "heldout_descriptor", "rkhs".
std::string objective_kind(const Objective& o);

struct EvalResult {
  double value = 0.0;      // always in [0, 1]
  bool undefined = false;  // a required descriptor had no value; value is 0
};

// Scores one molecule.  Deterministic and side-effect free; throws
// std::invalid_argument when the objective itself is malformed (empty MPO,
// zero logistic scale, anchor/weight length mismatch, ...).
EvalResult evaluate(const Objective& o, const MolecularGraph& g);

// ---------------------------------------------------------------------------
// Factories.

SimilarityObjective make_similarity(const MolecularGraph& target,
                                    const FingerprintConfig& cfg = {});

// Parses a formula like "C9H10N2O2" (element symbol, optional count, count 1
// when omitted).  Throws std::invalid_argument on empty/malformed input,
// unknown element symbols, or a repeated element.
IsomerObjective make_isomer(const std::string& formula);

// Calibrates the logistic from the pool's defined values of the descriptor:
// midpoint = median, scale = half the interquartile range (quantiles by
// linear interpolation), floored at 1e-9 so constant columns stay usable.
// Throws std::invalid_argument when no pool molecule defines the descriptor.
HeldOutDescriptorObjective make_heldout_descriptor(const Pool& pool, DescriptorId id);

// Draws n_anchors distinct pool fingerprints and seeded standard-normal
// weights, then fixes the output map so the pool's scores span [0, 1].  The
// same (pool, seed, n_anchors) always yields the same objective.  Requires
// 1 <= n_anchors <= pool.size(); cfg.nbits must match the pool fingerprints
// (WidthMismatch otherwise).
RkhsSyntheticObjective make_rkhs(const Pool& pool, std::uint64_t seed, int n_anchors,
                                 const FingerprintConfig& cfg = {});

// ---------------------------------------------------------------------------
// Budget accounting.

// Forwards to evaluate() and counts the calls.  Not thread-safe.
class CountingEvaluator {
 public:
  explicit CountingEvaluator(Objective obj) : obj_(std::move(obj)) {}

  EvalResult operator()(const MolecularGraph& g) {
    ++count_;
    return evaluate(obj_, g);
  }

  std::int64_t count() const { return count_; }
  const Objective& objective() const { return obj_; }

 private:
  Objective obj_;
  std::int64_t count_ = 0;
};

// ---------------------------------------------------------------------------
// Config files.

// Builds an objective from a JSON description:
//   {"kind": "similarity", "target": "<SMILES>", "fingerprint": {"radius": R, "nbits": N}}
//   {"kind": "isomer", "formula": "C9H10N2O2"}
//   {"kind": "mpo", "terms": [{"descriptor": "<name>", "modifier": M}, ...]}
//       M = {"shape": "gaussian", "mu": .., "sigma": ..}
//         | {"shape": "logistic", "midpoint": .., "scale": ..}
//   {"kind": "heldout_descriptor", "descriptor": "<name>", "midpoint": .., "scale": ..}
//       midpoint and scale may both be omitted; they are then calibrated from
//       the pool (which must be provided).
//   {"kind": "rkhs", "seed": S, "n_anchors": K, "fingerprint": {...}}
// The "fingerprint" block is optional and defaults to FingerprintConfig{}.
// `pool` may be null when no parameter requires it.  Malformed configs throw
// std::invalid_argument; a bad target SMILES throws ParseError.
Objective load_objective(const std::string& json_text, const Pool* pool = nullptr);

}  // namespace molbbo
