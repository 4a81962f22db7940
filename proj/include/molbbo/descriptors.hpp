// Intrinsic molecular descriptors computed directly from the heavy-atom graph.
//
// Eighteen descriptors spanning counting, topological-index, and electronic
// families.  Values are plain doubles; descriptors that need at least one bond
// are undefined on single-atom graphs and report that through an empty
// optional (or a NaN sentinel in the batch API) rather than a silent NaN.
//
// The set is partitioned into a training split (14 ids) used to generate
// surrogate training data and a held-out split (4 ids) reserved for
// downstream objectives, so that optimization targets are never functions the
// surrogate saw during training.
#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "molbbo/molgraph.hpp"

namespace molbbo {

enum class DescriptorId : int {
  MolecularWeight = 0,
  HeavyAtomCount,
  NumRings,
  NumAromaticRings,
  NumRotatableBonds,
  NumHDonors,
  NumHAcceptors,
  NumHeteroatoms,
  FractionCsp3,
  NumValenceElectrons,
  BalabanJ,
  BertzCT,
  HallKierAlpha,
  Kappa1,
  Kappa2,
  Chi0,
  Chi1,
  FrCO,
};

inline constexpr int kNumDescriptors = 18;

// Stable display/config name, e.g. "MolecularWeight", "fr_C_O".
std::string_view descriptor_name(DescriptorId id);

// Inverse of descriptor_name; empty optional for unknown names.
std::optional<DescriptorId> descriptor_from_name(std::string_view name);

// Immutable list of all ids plus the train/held-out partition.
class DescriptorRegistry {
 public:
  static const DescriptorRegistry& instance();

  const std::vector<DescriptorId>& all() const { return all_; }
  const std::vector<DescriptorId>& train_split() const { return train_; }
  const std::vector<DescriptorId>& heldout_split() const { return heldout_; }
  bool is_heldout(DescriptorId id) const;

 private:
  DescriptorRegistry();
  std::vector<DescriptorId> all_;
  std::vector<DescriptorId> train_;
  std::vector<DescriptorId> heldout_;
};

// Single descriptor; empty optional when undefined for this graph
// (BalabanJ / Chi1 / Kappa_m need at least one bond; the Kappa formulas are
// also undefined when their denominator vanishes).
std::optional<double> compute(const MolecularGraph& g, DescriptorId id);

// All descriptors in id order (length kNumDescriptors).  Undefined entries
// are encoded as quiet NaN; test with is_undefined.
std::vector<double> compute_all(const MolecularGraph& g);

// Sentinel used by compute_all for undefined entries.
double undefined_value();
bool is_undefined(double v);

}  // namespace molbbo
