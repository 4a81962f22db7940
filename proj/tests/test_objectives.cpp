#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "molbbo/descriptors.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/molgraph.hpp"
#include "molbbo/objectives.hpp"
#include "molbbo/rng.hpp"

using namespace molbbo;

namespace {

std::string write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const std::string& line : lines) out << line << "\n";
  return path;
}

Pool make_pool(const std::string& name, const std::vector<std::string>& lines) {
  const std::string path = write_lines(name, lines);
  Pool p = load_pool(path);
  std::remove(path.c_str());
  return p;
}

// Structurally diverse (pairwise-distinct fingerprints, asserted where a test
// depends on it).
const std::vector<std::string>& diverse12() {
  static const std::vector<std::string> mols = {
      "CCO",      "CCN",      "CC(=O)O", "c1ccccc1", "Oc1ccccc1", "c1ccncc1",
      "C1CCOCC1", "C1CCNC1",  "CC(C)O",  "OCCN",     "NCCN",      "CC#CC"};
  return mols;
}

Pool diverse_pool() {
  static const Pool pool = make_pool("objectives_diverse12.smi", diverse12());
  return pool;
}

// C, CC, ..., CCCCC: heavy-atom counts 1..5.
Pool alkane_pool() {
  static const Pool pool =
      make_pool("objectives_alkane5.smi", {"C", "CC", "CCC", "CCCC", "CCCCC"});
  return pool;
}

MolecularGraph mol(const std::string& smiles) { return parse_smiles(smiles); }

}  // namespace

// ---------------------------------------------------------------------------
// Modifiers

TEST_CASE("gaussian modifier peaks at mu and validates sigma") {
  const Modifier g = GaussianModifier{7.0, 2.0};
  CHECK(apply_modifier(g, 7.0) == 1.0);
  CHECK(apply_modifier(g, 9.0) == std::exp(-0.5));   // one sigma out
  CHECK(apply_modifier(g, 5.0) == std::exp(-0.5));   // symmetric
  CHECK(apply_modifier(g, 11.0) == std::exp(-2.0));  // two sigma out
  CHECK(apply_modifier(g, 1e9) == 0.0);              // extreme values underflow to 0
  CHECK_THROWS_AS(apply_modifier(GaussianModifier{0.0, 0.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_modifier(GaussianModifier{0.0, -1.0}, 1.0), std::invalid_argument);
}

TEST_CASE("logistic modifier is 0.5 at the midpoint and validates scale") {
  const Modifier l = LogisticModifier{10.0, 3.0};
  CHECK(apply_modifier(l, 10.0) == 0.5);
  CHECK(apply_modifier(l, 13.0) == 1.0 / (1.0 + std::exp(-1.0)));
  CHECK(apply_modifier(l, 7.0) == 1.0 / (1.0 + std::exp(1.0)));
  CHECK(apply_modifier(l, 1e9) == 1.0);   // saturates high
  CHECK(apply_modifier(l, -1e9) == 0.0);  // saturates low
  // Negative scale flips the direction.
  CHECK(apply_modifier(LogisticModifier{0.0, -1.0}, 1.0) == 1.0 / (1.0 + std::exp(1.0)));
  CHECK_THROWS_AS(apply_modifier(LogisticModifier{0.0, 0.0}, 1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Similarity

TEST_CASE("similarity objective: self-similarity is exactly 1") {
  const Objective obj = make_similarity(mol("CC(=O)O"));
  CHECK(evaluate(obj, mol("CC(=O)O")).value == 1.0);
  CHECK_FALSE(evaluate(obj, mol("CC(=O)O")).undefined);
  // Any other spelling of the same molecule scores identically.
  CHECK(evaluate(obj, mol("OC(C)=O")).value == 1.0);
}

TEST_CASE("similarity objective equals the tanimoto of the two fingerprints") {
  const FingerprintConfig cfg;
  const Objective obj = make_similarity(mol("CC(=O)O"), cfg);
  for (const char* s : {"CCO", "CCN", "c1ccccc1", "CC(=O)N"}) {
    const MolecularGraph g = mol(s);
    const double expected =
        tanimoto(morgan_fingerprint(g, cfg), morgan_fingerprint(mol("CC(=O)O"), cfg));
    const EvalResult r = evaluate(obj, g);
    CHECK(r.value == expected);
    CHECK_FALSE(r.undefined);
    CHECK(r.value >= 0.0);
    CHECK(r.value < 1.0);  // different molecules with distinct fingerprints
  }
}

TEST_CASE("similarity objective respects a custom fingerprint config") {
  const FingerprintConfig cfg{1, 256};
  const Objective obj = make_similarity(mol("CCO"), cfg);
  const auto& sim = std::get<SimilarityObjective>(obj);
  CHECK(sim.target.nbits == 256);
  const MolecularGraph probe = mol("CCCO");
  CHECK(evaluate(obj, probe).value ==
        tanimoto(morgan_fingerprint(probe, cfg), morgan_fingerprint(mol("CCO"), cfg)));
  // Width disagreement between config and target is a hard error.
  SimilarityObjective broken = sim;
  broken.fp_config.nbits = 2048;
  CHECK_THROWS_AS(evaluate(Objective{broken}, probe), WidthMismatch);
}

// ---------------------------------------------------------------------------
// Isomer

TEST_CASE("isomer formula parsing") {
  const IsomerObjective obj = make_isomer("C9H10N2O2");
  REQUIRE(obj.tracked.size() == 4);
  CHECK(obj.tracked == std::vector<Elem>{Elem::C, Elem::H, Elem::N, Elem::O});
  CHECK(obj.target_counts == std::vector<int>{9, 10, 2, 2});
  CHECK(obj.target_heavy == 13);  // hydrogen is not a heavy atom

  // Carbon is always tracked, with target 0 when the formula omits it.
  const IsomerObjective n2 = make_isomer("N2");
  CHECK(n2.tracked == std::vector<Elem>{Elem::N, Elem::C});
  CHECK(n2.target_counts == std::vector<int>{2, 0});
  CHECK(n2.target_heavy == 2);

  // Two-letter symbols and implicit count 1.
  const IsomerObjective hcl = make_isomer("HCl");
  CHECK(hcl.tracked == std::vector<Elem>{Elem::H, Elem::Cl, Elem::C});
  CHECK(hcl.target_counts == std::vector<int>{1, 1, 0});
  CHECK(hcl.target_heavy == 1);

  CHECK_THROWS_AS(make_isomer(""), std::invalid_argument);
  CHECK_THROWS_AS(make_isomer("X2"), std::invalid_argument);
  CHECK_THROWS_AS(make_isomer("2C"), std::invalid_argument);
  CHECK_THROWS_AS(make_isomer("c2"), std::invalid_argument);
  CHECK_THROWS_AS(make_isomer("C2x"), std::invalid_argument);
  CHECK_THROWS_AS(make_isomer("C2C"), std::invalid_argument);  // repeated element
  CHECK_THROWS_AS(make_isomer("Co2"), std::invalid_argument);  // unsupported element
}

TEST_CASE("isomer objective hand values") {
  // Target C2O on CCO: carbon 2, oxygen 1, heavy atoms 3 -- everything exact.
  const Objective c2o = make_isomer("C2O");
  CHECK(evaluate(c2o, mol("CCO")).value == 1.0);

  // CCC: carbon off by one and oxygen off by one, heavy count exact:
  // (e^{-1/2} * e^{-1/2})^{1/2} = e^{-1/2}.
  CHECK(evaluate(c2o, mol("CCC")).value == std::exp(-0.5));

  // Tracked elements all match but an untracked oxygen inflates the heavy
  // count: the heavy-atom penalty alone applies.
  CHECK(evaluate(make_isomer("C2"), mol("CCO")).value == std::exp(-0.5));

  // Exact formula with hydrogens: ethanol is C2H6O.
  CHECK(evaluate(make_isomer("C2H6O"), mol("CCO")).value == 1.0);
  // One hydrogen short of ethanol's count; three tracked elements.
  CHECK(evaluate(make_isomer("C2H5O"), mol("CCO")).value == std::exp(-0.5 / 3.0));

  // Water is H2O; hydrogens here are all implicit.
  CHECK(evaluate(make_isomer("H2O"), mol("O")).value == 1.0);
  CHECK(evaluate(make_isomer("Cl2"), mol("ClCl")).value == 1.0);

  // N2 on CCN: nitrogen off by 1, carbon off by 2 -> exp((-0.5 - 2)/2),
  // heavy count off by 1 -> times exp(-0.5).
  CHECK(evaluate(make_isomer("N2"), mol("CCN")).value ==
        std::exp(-1.25) * std::exp(-0.5));

  // Isomer objectives never flag undefined and always land in [0, 1].
  for (const std::string& s : diverse12()) {
    const EvalResult r = evaluate(c2o, mol(s));
    CHECK_FALSE(r.undefined);
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
}

// ---------------------------------------------------------------------------
// MPO

TEST_CASE("mpo with one term equals the modifier output exactly") {
  const MolecularGraph g = mol("CCO");
  const MpoTerm term{DescriptorId::MolecularWeight, LogisticModifier{40.0, 5.0}};
  const Objective obj = MpoObjective{{term}};
  const double v = compute(g, DescriptorId::MolecularWeight).value();
  CHECK(evaluate(obj, g).value == apply_modifier(term.modifier, v));

  // A Gaussian centred on the actual heavy-atom count scores exactly 1.
  const Objective peak = MpoObjective{{{DescriptorId::HeavyAtomCount, GaussianModifier{3.0, 1.0}}}};
  CHECK(evaluate(peak, g).value == 1.0);
}

TEST_CASE("mpo geometric mean of two terms matches a hand computation") {
  const MolecularGraph g = mol("CCO");
  const MpoObjective obj{{{DescriptorId::HeavyAtomCount, GaussianModifier{2.0, 1.0}},
                          {DescriptorId::MolecularWeight, LogisticModifier{40.0, 5.0}}}};
  const double m1 = std::exp(-0.5);  // heavy count 3, one sigma from 2
  const double m2 = 1.0 / (1.0 + std::exp(-(compute(g, DescriptorId::MolecularWeight).value() - 40.0) / 5.0));
  const EvalResult r = evaluate(Objective{obj}, g);
  CHECK(r.value == doctest::Approx(std::sqrt(m1 * m2)).epsilon(1e-12));
  CHECK_FALSE(r.undefined);
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 1.0);
}

TEST_CASE("mpo is zero when any component is zero") {
  // The first Gaussian underflows to exactly 0 this far from its peak.
  const MpoObjective obj{{{DescriptorId::HeavyAtomCount, GaussianModifier{1e6, 1.0}},
                          {DescriptorId::MolecularWeight, LogisticModifier{40.0, 5.0}}}};
  const EvalResult r = evaluate(Objective{obj}, mol("CCO"));
  CHECK(r.value == 0.0);
  CHECK_FALSE(r.undefined);
}

TEST_CASE("mpo propagates undefined descriptors as score 0 with the flag") {
  // BalabanJ needs at least one bond, so methane leaves it undefined.
  const MpoObjective obj{{{DescriptorId::HeavyAtomCount, GaussianModifier{1.0, 1.0}},
                          {DescriptorId::BalabanJ, GaussianModifier{2.0, 1.0}}}};
  const EvalResult r = evaluate(Objective{obj}, mol("C"));
  CHECK(r.value == 0.0);
  CHECK(r.undefined);
  // The same objective is defined on a bonded molecule.
  CHECK_FALSE(evaluate(Objective{obj}, mol("CC")).undefined);
}

TEST_CASE("mpo with no terms is rejected") {
  CHECK_THROWS_AS(evaluate(Objective{MpoObjective{}}, mol("CCO")), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Held-out descriptor

TEST_CASE("held-out descriptor objective applies the logistic squash") {
  const HeldOutDescriptorObjective obj{DescriptorId::HeavyAtomCount, 2.5, 0.5};
  CHECK(evaluate(Objective{obj}, mol("CCO")).value == 1.0 / (1.0 + std::exp(-1.0)));
  CHECK(evaluate(Objective{obj}, mol("CC")).value == 1.0 / (1.0 + std::exp(1.0)));

  HeldOutDescriptorObjective broken = obj;
  broken.scale = 0.0;
  CHECK_THROWS_AS(evaluate(Objective{broken}, mol("CCO")), std::invalid_argument);
}

TEST_CASE("held-out descriptor objective flags undefined descriptors") {
  const HeldOutDescriptorObjective obj{DescriptorId::BalabanJ, 2.0, 1.0};
  const EvalResult r = evaluate(Objective{obj}, mol("C"));
  CHECK(r.value == 0.0);
  CHECK(r.undefined);
}

TEST_CASE("held-out calibration: midpoint is the pool median, scale half the IQR") {
  // Heavy-atom counts over the alkane pool are {1,2,3,4,5}: median 3,
  // quartiles 2 and 4 by linear interpolation, so scale = (4-2)/2 = 1.
  const Pool pool = alkane_pool();
  const HeldOutDescriptorObjective obj =
      make_heldout_descriptor(pool, DescriptorId::HeavyAtomCount);
  CHECK(obj.descriptor == DescriptorId::HeavyAtomCount);
  CHECK(obj.midpoint == 3.0);
  CHECK(obj.scale == 1.0);
  CHECK(evaluate(Objective{obj}, mol("CCCC")).value == 1.0 / (1.0 + std::exp(-1.0)));

  // Even-sized pool {1,2,3,4}: median 2.5, quartiles 1.75 / 3.25, scale 0.75.
  const Pool pool4 = make_pool("objectives_alkane4.smi", {"C", "CC", "CCC", "CCCC"});
  const HeldOutDescriptorObjective obj4 =
      make_heldout_descriptor(pool4, DescriptorId::HeavyAtomCount);
  CHECK(obj4.midpoint == 2.5);
  CHECK(obj4.scale == 0.75);
}

TEST_CASE("held-out calibration floors the scale on constant columns") {
  // No alkane has a ring, so the NumRings column is identically zero.
  const HeldOutDescriptorObjective obj =
      make_heldout_descriptor(alkane_pool(), DescriptorId::NumRings);
  CHECK(obj.midpoint == 0.0);
  CHECK(obj.scale == 1e-9);
  // At the midpoint the squash still reads 0.5; one ring saturates to 1.
  CHECK(evaluate(Objective{obj}, mol("CC")).value == 0.5);
  CHECK(evaluate(Objective{obj}, mol("C1CC1")).value == 1.0);
}

TEST_CASE("held-out calibration skips undefined entries and rejects empty columns") {
  // BalabanJ is undefined on methane only; calibration then uses the four
  // bonded alkanes and the midpoint is their interpolated median.
  const Pool pool = alkane_pool();
  const HeldOutDescriptorObjective obj = make_heldout_descriptor(pool, DescriptorId::BalabanJ);
  std::vector<double> vals;
  for (const char* s : {"CC", "CCC", "CCCC", "CCCCC"}) {
    vals.push_back(compute(mol(s), DescriptorId::BalabanJ).value());
  }
  std::sort(vals.begin(), vals.end());
  CHECK(obj.midpoint == doctest::Approx(0.5 * (vals[1] + vals[2])).epsilon(1e-12));

  // A column with no defined value at all cannot be calibrated.
  const Pool atoms = make_pool("objectives_atoms.smi", {"C", "N", "O"});
  CHECK_THROWS_AS(make_heldout_descriptor(atoms, DescriptorId::BalabanJ),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// RKHS synthetic

TEST_CASE("rkhs objective is reproducible from its seed") {
  const Pool pool = diverse_pool();
  const RkhsSyntheticObjective a = make_rkhs(pool, 7, 4);
  const RkhsSyntheticObjective b = make_rkhs(pool, 7, 4);
  REQUIRE(a.anchors.size() == 4);
  REQUIRE(a.weights.size() == 4);
  CHECK(a.anchors == b.anchors);
  CHECK(a.weights == b.weights);
  CHECK(a.s_min == b.s_min);
  CHECK(a.s_range == b.s_range);

  const RkhsSyntheticObjective c = make_rkhs(pool, 8, 4);
  CHECK(a.weights != c.weights);
}

TEST_CASE("rkhs calibration spans exactly [0,1] on the pool") {
  const Pool pool = diverse_pool();
  // The calibration argument needs pairwise-distinct fingerprints.
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      REQUIRE_FALSE(pool.fingerprints[i] == pool.fingerprints[j]);
    }
  }
  const Objective obj{make_rkhs(pool, 42, 5)};
  double lo = 2.0;
  double hi = -1.0;
  for (const MolecularGraph& g : pool.molecules) {
    const EvalResult r = evaluate(obj, g);
    CHECK_FALSE(r.undefined);
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
    lo = std::min(lo, r.value);
    hi = std::max(hi, r.value);
  }
  CHECK(lo == 0.0);  // the pool minimum maps to exactly 0
  CHECK(hi == 1.0);  // and the pool maximum to exactly 1
}

TEST_CASE("rkhs score equals the hand-computed affine-mapped kernel sum") {
  const Pool pool = diverse_pool();
  const RkhsSyntheticObjective obj = make_rkhs(pool, 3, 4);
  for (const char* s : {"CCCC(=O)N", "c1ccc(O)cc1C", "CCOC"}) {  // off-pool probes
    const MolecularGraph g = mol(s);
    const Fingerprint fp = morgan_fingerprint(g, obj.fp_config);
    double ksum = 0.0;
    for (std::size_t j = 0; j < obj.anchors.size(); ++j) {
      ksum += obj.weights[j] * tanimoto(fp, obj.anchors[j]);
    }
    const double expected = std::clamp((ksum - obj.s_min) / obj.s_range, 0.0, 1.0);
    CHECK(evaluate(Objective{obj}, g).value == expected);
  }
}

TEST_CASE("rkhs validates its inputs") {
  const Pool pool = diverse_pool();
  CHECK_THROWS_AS(make_rkhs(pool, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_rkhs(pool, 1, static_cast<int>(pool.size()) + 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_rkhs(pool, 1, 4, FingerprintConfig{2, 1024}), WidthMismatch);

  RkhsSyntheticObjective broken = make_rkhs(pool, 1, 4);
  broken.weights.pop_back();
  CHECK_THROWS_AS(evaluate(Objective{broken}, mol("CCO")), std::invalid_argument);
  broken.weights.clear();
  broken.anchors.clear();
  CHECK_THROWS_AS(evaluate(Objective{broken}, mol("CCO")), std::invalid_argument);
}

TEST_CASE("rkhs degenerate calibration scores 0.5 everywhere") {
  // Plain cycloalkanes share one saturated fingerprint (every atom sees the
  // same 2-regular uniform environment), so every kernel sum coincides and
  // the affine map collapses.
  const Pool pool = make_pool("objectives_rings.smi", {"C1CC1", "C1CCCC1", "C1CCCCC1"});
  REQUIRE(pool.size() == 3);
  REQUIRE(pool.fingerprints[0] == pool.fingerprints[1]);
  REQUIRE(pool.fingerprints[0] == pool.fingerprints[2]);
  const RkhsSyntheticObjective obj = make_rkhs(pool, 5, 2);
  CHECK(obj.s_range == 0.0);
  CHECK(evaluate(Objective{obj}, mol("CCCCCC")).value == 0.5);
  CHECK(evaluate(Objective{obj}, mol("c1ccccc1")).value == 0.5);
}

// ---------------------------------------------------------------------------
// Cross-cutting properties

TEST_CASE("every objective is a pure function of the graph: respellings score identically") {
  const Pool pool = diverse_pool();
  // Fingerprint- and count-based objectives are exactly label-invariant;
  // descriptor-based ones inherit the descriptors' 1e-9 relative guarantee
  // (atom-ordered floating-point accumulation).
  std::vector<Objective> exact;
  exact.emplace_back(make_similarity(mol("CC(=O)O")));
  exact.emplace_back(make_isomer("C4H8O2"));
  exact.emplace_back(make_rkhs(pool, 11, 4));
  std::vector<Objective> close;
  close.emplace_back(MpoObjective{{{DescriptorId::HeavyAtomCount, GaussianModifier{6.0, 2.0}},
                                   {DescriptorId::NumHAcceptors, GaussianModifier{1.0, 1.0}}}});
  close.emplace_back(make_heldout_descriptor(pool, DescriptorId::FractionCsp3));

  Rng rng(99);
  for (const std::string& s : diverse12()) {
    const MolecularGraph g = mol(s);
    std::vector<EvalResult> base;
    for (const Objective& obj : exact) base.push_back(evaluate(obj, g));
    std::vector<EvalResult> base_close;
    for (const Objective& obj : close) base_close.push_back(evaluate(obj, g));
    for (const EvalResult& r : base) {
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
    }
    for (int rep = 0; rep < 3; ++rep) {
      const MolecularGraph respelled = mol(write_smiles(g, rng));
      for (std::size_t k = 0; k < exact.size(); ++k) {
        const EvalResult r = evaluate(exact[k], respelled);
        CHECK(r.value == base[k].value);
        CHECK(r.undefined == base[k].undefined);
      }
      for (std::size_t k = 0; k < close.size(); ++k) {
        const EvalResult r = evaluate(close[k], respelled);
        CHECK(r.value == doctest::Approx(base_close[k].value).epsilon(1e-8));
        CHECK(r.undefined == base_close[k].undefined);
      }
    }
  }
}

TEST_CASE("objective_kind names each variant") {
  CHECK(objective_kind(Objective{make_similarity(mol("C"))}) == "similarity");
  CHECK(objective_kind(Objective{make_isomer("C2")}) == "isomer");
  CHECK(objective_kind(Objective{MpoObjective{}}) == "mpo");
  CHECK(objective_kind(Objective{HeldOutDescriptorObjective{}}) == "heldout_descriptor");
  CHECK(objective_kind(Objective{RkhsSyntheticObjective{}}) == "rkhs");
}

TEST_CASE("counting evaluator counts every call and forwards results") {
  CountingEvaluator counter{Objective{make_similarity(mol("CC(=O)O"))}};
  CHECK(counter.count() == 0);
  int calls = 0;
  for (const char* s : {"CCO", "CCN", "CCO", "c1ccccc1", "CC(=O)O", "CCS", "CCO"}) {
    const EvalResult r = counter(mol(s));
    CHECK(r.value == evaluate(counter.objective(), mol(s)).value);
    ++calls;
    CHECK(counter.count() == calls);
  }
  CHECK(counter.count() == 7);
}

// ---------------------------------------------------------------------------
// Config loading

TEST_CASE("load_objective: similarity") {
  const Objective obj = load_objective(R"({"kind": "similarity", "target": "CC(=O)O"})");
  CHECK(objective_kind(obj) == "similarity");
  CHECK(evaluate(obj, mol("CC(=O)O")).value == 1.0);

  const Objective small = load_objective(
      R"({"kind": "similarity", "target": "CCO", "fingerprint": {"radius": 1, "nbits": 256}})");
  const auto& sim = std::get<SimilarityObjective>(small);
  CHECK(sim.target.nbits == 256);
  CHECK(sim.fp_config.radius == 1);
  const MolecularGraph probe = mol("CCCO");
  CHECK(evaluate(small, probe).value ==
        evaluate(Objective{make_similarity(mol("CCO"), FingerprintConfig{1, 256})}, probe).value);

  CHECK_THROWS_AS(load_objective(R"({"kind": "similarity"})"), std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "similarity", "target": "C(C"})"), ParseError);
}

TEST_CASE("load_objective: isomer") {
  const Objective obj = load_objective(R"({"kind": "isomer", "formula": "C2O"})");
  CHECK(evaluate(obj, mol("CCC")).value == std::exp(-0.5));
  CHECK_THROWS_AS(load_objective(R"({"kind": "isomer", "formula": "X9"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "isomer"})"), std::invalid_argument);
}

TEST_CASE("load_objective: mpo") {
  const Objective obj = load_objective(R"({
    "kind": "mpo",
    "terms": [
      {"descriptor": "HeavyAtomCount", "modifier": {"shape": "gaussian", "mu": 2.0, "sigma": 1.0}},
      {"descriptor": "MolecularWeight", "modifier": {"shape": "logistic", "midpoint": 45.0, "scale": 5.0}}
    ]})");
  const MolecularGraph g = mol("CCO");
  const MpoObjective direct{{{DescriptorId::HeavyAtomCount, GaussianModifier{2.0, 1.0}},
                             {DescriptorId::MolecularWeight, LogisticModifier{45.0, 5.0}}}};
  CHECK(evaluate(obj, g).value == evaluate(Objective{direct}, g).value);

  CHECK_THROWS_AS(load_objective(R"({"kind": "mpo", "terms": []})"), std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "mpo", "terms": [
      {"descriptor": "NoSuchDescriptor", "modifier": {"shape": "gaussian", "mu": 0, "sigma": 1}}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "mpo", "terms": [
      {"descriptor": "HeavyAtomCount", "modifier": {"shape": "triangular", "mu": 0, "sigma": 1}}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "mpo", "terms": [
      {"descriptor": "HeavyAtomCount", "modifier": {"shape": "gaussian", "mu": 0, "sigma": -1}}]})"),
                  std::invalid_argument);
}

TEST_CASE("load_objective: heldout descriptor, explicit and pool-calibrated") {
  const Objective explicit_obj = load_objective(
      R"({"kind": "heldout_descriptor", "descriptor": "BalabanJ", "midpoint": 2.0, "scale": 0.5})");
  const auto& h = std::get<HeldOutDescriptorObjective>(explicit_obj);
  CHECK(h.descriptor == DescriptorId::BalabanJ);
  CHECK(h.midpoint == 2.0);
  CHECK(h.scale == 0.5);

  const Pool pool = alkane_pool();
  const Objective calibrated = load_objective(
      R"({"kind": "heldout_descriptor", "descriptor": "HeavyAtomCount"})", &pool);
  const auto& c = std::get<HeldOutDescriptorObjective>(calibrated);
  CHECK(c.midpoint == 3.0);
  CHECK(c.scale == 1.0);

  // Calibration needs the pool; half-specified squashes are rejected.
  CHECK_THROWS_AS(load_objective(R"({"kind": "heldout_descriptor", "descriptor": "BalabanJ"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      load_objective(R"({"kind": "heldout_descriptor", "descriptor": "BalabanJ", "midpoint": 1.0})",
                     &pool),
      std::invalid_argument);
  CHECK_THROWS_AS(
      load_objective(R"({"kind": "heldout_descriptor", "descriptor": "Nope", "midpoint": 1.0, "scale": 1.0})"),
      std::invalid_argument);
  CHECK_THROWS_AS(
      load_objective(R"({"kind": "heldout_descriptor", "descriptor": "BalabanJ", "midpoint": 1.0, "scale": 0.0})"),
      std::invalid_argument);
}

TEST_CASE("load_objective: rkhs") {
  const Pool pool = diverse_pool();
  const Objective obj = load_objective(R"({"kind": "rkhs", "seed": 7, "n_anchors": 4})", &pool);
  const RkhsSyntheticObjective direct = make_rkhs(pool, 7, 4);
  const MolecularGraph probe = mol("CCOC");
  CHECK(evaluate(obj, probe).value == evaluate(Objective{direct}, probe).value);
  CHECK(std::get<RkhsSyntheticObjective>(obj).weights == direct.weights);

  CHECK_THROWS_AS(load_objective(R"({"kind": "rkhs", "seed": 7, "n_anchors": 4})"),
                  std::invalid_argument);  // no pool
  CHECK_THROWS_AS(load_objective(R"({"kind": "rkhs", "seed": "x", "n_anchors": 4})", &pool),
                  std::invalid_argument);  // wrong type
}

TEST_CASE("load_objective rejects malformed configs") {
  CHECK_THROWS_AS(load_objective("not json at all"), std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"kind": "frobnicate"})"), std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"({"target": "CCO"})"), std::invalid_argument);
  CHECK_THROWS_AS(load_objective(R"([1,2,3])"), std::invalid_argument);
}
