#include "molbbo/objectives.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molbbo/rng.hpp"

namespace molbbo {

namespace {

constexpr std::uint64_t kRkhsTag = 0x524b4853;  // "RKHS"

struct ElementCounts {
  std::array<int, kNumElements> by_elem{};  // hydrogens folded into the H slot
  int heavy = 0;
};

ElementCounts count_elements(const MolecularGraph& g) {
  ElementCounts c;
  int hydrogens = 0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    const Atom& a = g.atoms[static_cast<std::size_t>(i)];
    if (a.element == Elem::H) {
      ++hydrogens;
    } else {
      ++c.by_elem[static_cast<std::size_t>(a.element)];
      ++c.heavy;
    }
    hydrogens += g.total_h(i);
  }
  c.by_elem[static_cast<std::size_t>(Elem::H)] = hydrogens;
  return c;
}

// Quantile of a sorted sample by linear interpolation between order
// statistics (h = p * (n - 1)).
double quantile(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double kernel_sum(const RkhsSyntheticObjective& o, const Fingerprint& fp) {
  double s = 0.0;
  for (std::size_t j = 0; j < o.anchors.size(); ++j) {
    s += o.weights[j] * tanimoto(fp, o.anchors[j]);
  }
  return s;
}

EvalResult eval_similarity(const SimilarityObjective& o, const MolecularGraph& g) {
  return {tanimoto(morgan_fingerprint(g, o.fp_config), o.target), false};
}

EvalResult eval_isomer(const IsomerObjective& o, const MolecularGraph& g) {
  if (o.tracked.empty() || o.tracked.size() != o.target_counts.size()) {
    throw std::invalid_argument("isomer objective: tracked/target size mismatch");
  }
  const ElementCounts c = count_elements(g);
  double log_sum = 0.0;
  for (std::size_t k = 0; k < o.tracked.size(); ++k) {
    const double d = c.by_elem[static_cast<std::size_t>(o.tracked[k])] - o.target_counts[k];
    log_sum += -0.5 * d * d;
  }
  double v = std::exp(log_sum / static_cast<double>(o.tracked.size()));
  const double hd = c.heavy - o.target_heavy;
  v *= std::exp(-0.5 * hd * hd);
  return {v, false};
}

EvalResult eval_mpo(const MpoObjective& o, const MolecularGraph& g) {
  if (o.terms.empty()) {
    throw std::invalid_argument("mpo objective has no terms");
  }
  double product = 1.0;
  for (const MpoTerm& term : o.terms) {
    const std::optional<double> v = compute(g, term.descriptor);
    if (!v) return {0.0, true};
    product *= apply_modifier(term.modifier, *v);
  }
  if (o.terms.size() == 1) return {product, false};
  return {std::pow(product, 1.0 / static_cast<double>(o.terms.size())), false};
}

EvalResult eval_heldout(const HeldOutDescriptorObjective& o, const MolecularGraph& g) {
  if (o.scale == 0.0) {
    throw std::invalid_argument("held-out descriptor objective: scale must be nonzero");
  }
  const std::optional<double> v = compute(g, o.descriptor);
  if (!v) return {0.0, true};
  return {1.0 / (1.0 + std::exp(-(*v - o.midpoint) / o.scale)), false};
}

EvalResult eval_rkhs(const RkhsSyntheticObjective& o, const MolecularGraph& g) {
  if (o.anchors.empty() || o.anchors.size() != o.weights.size()) {
    throw std::invalid_argument("rkhs objective: anchors/weights size mismatch");
  }
  if (o.s_range == 0.0) return {0.5, false};  // degenerate calibration
  const double s = kernel_sum(o, morgan_fingerprint(g, o.fp_config));
  const double raw = (s - o.s_min) / o.s_range;
  return {std::clamp(raw, 0.0, 1.0), false};
}

}  // namespace

double apply_modifier(const Modifier& m, double v) {
  if (const auto* g = std::get_if<GaussianModifier>(&m)) {
    if (!(g->sigma > 0.0)) {
      throw std::invalid_argument("gaussian modifier: sigma must be positive");
    }
    const double z = (v - g->mu) / g->sigma;
    return std::exp(-0.5 * z * z);
  }
  const auto& l = std::get<LogisticModifier>(m);
  if (l.scale == 0.0) {
    throw std::invalid_argument("logistic modifier: scale must be nonzero");
  }
  return 1.0 / (1.0 + std::exp(-(v - l.midpoint) / l.scale));
}

std::string objective_kind(const Objective& o) {
  struct Namer {
    std::string operator()(const SimilarityObjective&) const { return "similarity"; }
    std::string operator()(const IsomerObjective&) const { return "isomer"; }
    std::string operator()(const MpoObjective&) const { return "mpo"; }
    std::string operator()(const HeldOutDescriptorObjective&) const {
      return "heldout_descriptor";
    }
    std::string operator()(const RkhsSyntheticObjective&) const { return "rkhs"; }
  };
  return std::visit(Namer{}, o);
}

EvalResult evaluate(const Objective& o, const MolecularGraph& g) {
  struct Eval {
    const MolecularGraph& g;
    EvalResult operator()(const SimilarityObjective& x) const { return eval_similarity(x, g); }
    EvalResult operator()(const IsomerObjective& x) const { return eval_isomer(x, g); }
    EvalResult operator()(const MpoObjective& x) const { return eval_mpo(x, g); }
    EvalResult operator()(const HeldOutDescriptorObjective& x) const {
      return eval_heldout(x, g);
    }
    EvalResult operator()(const RkhsSyntheticObjective& x) const { return eval_rkhs(x, g); }
  };
  return std::visit(Eval{g}, o);
}

SimilarityObjective make_similarity(const MolecularGraph& target,
                                    const FingerprintConfig& cfg) {
  return {morgan_fingerprint(target, cfg), cfg};
}

IsomerObjective make_isomer(const std::string& formula) {
  if (formula.empty()) {
    throw std::invalid_argument("isomer formula is empty");
  }
  IsomerObjective obj;
  std::size_t i = 0;
  while (i < formula.size()) {
    const unsigned char head = static_cast<unsigned char>(formula[i]);
    if (!std::isupper(head)) {
      throw std::invalid_argument("isomer formula '" + formula +
                                  "': expected an element symbol at position " +
                                  std::to_string(i));
    }
    std::string symbol(1, formula[i]);
    ++i;
    if (i < formula.size() && std::islower(static_cast<unsigned char>(formula[i]))) {
      symbol += formula[i];
      ++i;
    }
    const std::optional<Elem> elem = element_from_symbol(symbol);
    if (!elem) {
      throw std::invalid_argument("isomer formula '" + formula + "': unknown element '" +
                                  symbol + "'");
    }
    long count = 1;
    if (i < formula.size() && std::isdigit(static_cast<unsigned char>(formula[i]))) {
      count = 0;
      while (i < formula.size() && std::isdigit(static_cast<unsigned char>(formula[i]))) {
        count = count * 10 + (formula[i] - '0');
        if (count > 1000000) {
          throw std::invalid_argument("isomer formula '" + formula + "': count too large");
        }
        ++i;
      }
    }
    if (std::find(obj.tracked.begin(), obj.tracked.end(), *elem) != obj.tracked.end()) {
      throw std::invalid_argument("isomer formula '" + formula + "': element '" + symbol +
                                  "' appears twice");
    }
    obj.tracked.push_back(*elem);
    obj.target_counts.push_back(static_cast<int>(count));
  }
  if (std::find(obj.tracked.begin(), obj.tracked.end(), Elem::C) == obj.tracked.end()) {
    obj.tracked.push_back(Elem::C);
    obj.target_counts.push_back(0);
  }
  obj.target_heavy = 0;
  for (std::size_t k = 0; k < obj.tracked.size(); ++k) {
    if (obj.tracked[k] != Elem::H) obj.target_heavy += obj.target_counts[k];
  }
  return obj;
}

HeldOutDescriptorObjective make_heldout_descriptor(const Pool& pool, DescriptorId id) {
  std::vector<double> values;
  const auto column = static_cast<std::size_t>(id);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double v = pool.descriptor_table[i][column];
    if (!is_undefined(v)) values.push_back(v);
  }
  if (values.empty()) {
    throw std::invalid_argument(
        std::string("held-out calibration: no pool molecule defines descriptor '") +
        std::string(descriptor_name(id)) + "'");
  }
  std::sort(values.begin(), values.end());
  HeldOutDescriptorObjective obj;
  obj.descriptor = id;
  obj.midpoint = quantile(values, 0.5);
  const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
  obj.scale = std::max(0.5 * iqr, 1e-9);
  return obj;
}

RkhsSyntheticObjective make_rkhs(const Pool& pool, std::uint64_t seed, int n_anchors,
                                 const FingerprintConfig& cfg) {
  if (pool.size() == 0) {
    throw std::invalid_argument("rkhs objective: empty pool");
  }
  if (n_anchors < 1 || static_cast<std::size_t>(n_anchors) > pool.size()) {
    throw std::invalid_argument("rkhs objective: n_anchors must be in [1, pool size]");
  }
  if (pool.fingerprints.front().nbits != cfg.nbits) {
    throw WidthMismatch("rkhs objective: fingerprint config width " +
                        std::to_string(cfg.nbits) + " does not match the pool's " +
                        std::to_string(pool.fingerprints.front().nbits));
  }
  Rng rng(derive_seed(seed, kRkhsTag));

  RkhsSyntheticObjective obj;
  obj.fp_config = cfg;
  // Distinct anchor indices via partial Fisher-Yates.
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int k = 0; k < n_anchors; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    std::swap(order[uk], order[uk + rng.index(order.size() - uk)]);
    obj.anchors.push_back(pool.fingerprints[order[uk]]);
  }
  for (int k = 0; k < n_anchors; ++k) {
    obj.weights.push_back(rng.normal());
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Fingerprint& fp : pool.fingerprints) {
    const double s = kernel_sum(obj, fp);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  obj.s_min = lo;
  obj.s_range = hi - lo;  // 0 when every pool score coincides
  return obj;
}

// ---------------------------------------------------------------------------
// Config files.

namespace {

using nlohmann::json;

FingerprintConfig fingerprint_config_from(const json& j) {
  FingerprintConfig cfg;
  if (j.contains("fingerprint")) {
    const json& f = j.at("fingerprint");
    if (f.contains("radius")) cfg.radius = f.at("radius").get<int>();
    if (f.contains("nbits")) cfg.nbits = f.at("nbits").get<int>();
  }
  return cfg;
}

DescriptorId descriptor_from(const json& j, const char* key) {
  const std::string name = j.at(key).get<std::string>();
  const std::optional<DescriptorId> id = descriptor_from_name(name);
  if (!id) {
    throw std::invalid_argument("objective config: unknown descriptor '" + name + "'");
  }
  return *id;
}

Modifier modifier_from(const json& j) {
  const std::string shape = j.at("shape").get<std::string>();
  if (shape == "gaussian") {
    const GaussianModifier m{j.at("mu").get<double>(), j.at("sigma").get<double>()};
    if (!(m.sigma > 0.0)) {
      throw std::invalid_argument("objective config: gaussian sigma must be positive");
    }
    return m;
  }
  if (shape == "logistic") {
    const LogisticModifier m{j.at("midpoint").get<double>(), j.at("scale").get<double>()};
    if (m.scale == 0.0) {
      throw std::invalid_argument("objective config: logistic scale must be nonzero");
    }
    return m;
  }
  throw std::invalid_argument("objective config: unknown modifier shape '" + shape + "'");
}

Objective objective_from(const json& j, const Pool* pool) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "similarity") {
    const FingerprintConfig cfg = fingerprint_config_from(j);
    const MolecularGraph target = parse_smiles(j.at("target").get<std::string>());
    return make_similarity(target, cfg);
  }
  if (kind == "isomer") {
    return make_isomer(j.at("formula").get<std::string>());
  }
  if (kind == "mpo") {
    MpoObjective obj;
    for (const json& t : j.at("terms")) {
      obj.terms.push_back({descriptor_from(t, "descriptor"), modifier_from(t.at("modifier"))});
    }
    if (obj.terms.empty()) {
      throw std::invalid_argument("objective config: mpo needs at least one term");
    }
    return obj;
  }
  if (kind == "heldout_descriptor") {
    const DescriptorId id = descriptor_from(j, "descriptor");
    const bool has_mid = j.contains("midpoint");
    const bool has_scale = j.contains("scale");
    if (has_mid != has_scale) {
      throw std::invalid_argument(
          "objective config: heldout_descriptor needs both midpoint and scale, or neither");
    }
    if (has_mid) {
      HeldOutDescriptorObjective obj;
      obj.descriptor = id;
      obj.midpoint = j.at("midpoint").get<double>();
      obj.scale = j.at("scale").get<double>();
      if (obj.scale == 0.0) {
        throw std::invalid_argument("objective config: heldout_descriptor scale must be nonzero");
      }
      return obj;
    }
    if (pool == nullptr) {
      throw std::invalid_argument(
          "objective config: heldout_descriptor calibration requires a pool");
    }
    return make_heldout_descriptor(*pool, id);
  }
  if (kind == "rkhs") {
    if (pool == nullptr) {
      throw std::invalid_argument("objective config: rkhs requires a pool");
    }
    const FingerprintConfig cfg = fingerprint_config_from(j);
    return make_rkhs(*pool, j.at("seed").get<std::uint64_t>(), j.at("n_anchors").get<int>(),
                     cfg);
  }
  throw std::invalid_argument("objective config: unknown kind '" + kind + "'");
}

}  // namespace

Objective load_objective(const std::string& json_text, const Pool* pool) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("objective config is not valid JSON: ") + e.what());
  }
  try {
    return objective_from(j, pool);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("objective config: ") + e.what());
  }
}

}  // namespace molbbo
