#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "molbbo/molgraph.hpp"

using namespace molbbo;

namespace {

// Diverse local list for parser/service tests; corpus-wide checks live in the
// pool-ingestion tests.
const std::vector<std::string> kMolecules = {
    "C", "CC", "CCO", "CC(C)C", "CC(C)(C)C", "C1CC1", "C1CCCCC1", "c1ccccc1",
    "c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "Cc1ccccc1", "CC(=O)O",
    "CC(=O)[O-]", "C[N+](C)(C)C", "N#Cc1ccccc1", "O=C=O", "CS(=O)(=O)N",
    "c1ccc2ccccc2c1", "c1ccc(-c2ccccc2)cc1", "CC(=O)Oc1ccccc1C(=O)O",
    "FC(F)(F)c1ccccc1", "ClCCBr", "ICCF", "OCC(O)CO", "C=CC=C", "C#CC#C",
    "CN1CCCC1", "O=S(=O)(O)O", "NC(=O)c1ccccc1", "COc1ccc(CCN)cc1",
    "C1CC2CCC1CC2", "CC1(C)CCCCC1", "[nH]1cccc1",
};

std::vector<int> implicit_hs(const MolecularGraph& g) {
  std::vector<int> out;
  for (const Atom& a : g.atoms) out.push_back(a.implicit_h);
  return out;
}

}  // namespace

TEST_CASE("methane: one heavy atom, four implicit hydrogens") {
  const auto g = parse_smiles("C");
  CHECK(g.n_atoms() == 1);
  CHECK(g.n_bonds() == 0);
  CHECK(g.atoms[0].implicit_h == 4);
}

TEST_CASE("benzene: six aromatic atoms and bonds, one ring") {
  const auto g = parse_smiles("c1ccccc1");
  CHECK(g.n_atoms() == 6);
  CHECK(g.n_bonds() == 6);
  for (const Atom& a : g.atoms) {
    CHECK(a.aromatic);
    CHECK(a.implicit_h == 1);
  }
  for (const Bond& b : g.bonds) CHECK(b.order == BondOrder::Aromatic);
  CHECK(g.cyclomatic() == 1);
}

TEST_CASE("unbalanced branch is a syntax error") {
  CHECK_THROWS_AS(parse_smiles("C("), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C)C"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C(C"), SyntaxError);
}

TEST_CASE("ethanol: atoms, bonds, implicit hydrogens") {
  const auto g = parse_smiles("CCO");
  CHECK(g.n_atoms() == 3);
  REQUIRE(g.n_bonds() == 2);
  for (const Bond& b : g.bonds) CHECK(b.order == BondOrder::Single);
  CHECK(implicit_hs(g) == std::vector<int>{3, 2, 1});
}

TEST_CASE("syntax errors: dangling ring digit, unknown element, trailing bond") {
  CHECK_THROWS_AS(parse_smiles("C1CC"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("CX"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("[Xe]"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C="), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C=#C"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("=CC"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("1CC1"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles(""), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("[CH4"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C%1C"), SyntaxError);
}

TEST_CASE("valence errors") {
  CHECK_THROWS_AS(parse_smiles("F=F"), ValenceError);       // fluorine cannot take a double bond
  CHECK_THROWS_AS(parse_smiles("C:C"), ValenceError);       // aromatic bond needs aromatic atoms
  CHECK_THROWS_AS(parse_smiles("[CH5]"), ValenceError);     // five connections exceed carbon
  CHECK_THROWS_AS(parse_smiles("[C]"), ValenceError);       // bare bracket carbon: no valence fits
  CHECK_THROWS_AS(parse_smiles("C11"), ValenceError);       // ring closure to the same atom
  CHECK_THROWS_AS(parse_smiles("C12CC12"), ValenceError);   // duplicate bond between one pair
  CHECK_THROWS_AS(parse_smiles("O=C(C)(C)C=O"), ValenceError);  // carbon with 5 connections
}

TEST_CASE("fragments rejected by default, largest kept in permissive mode") {
  CHECK_THROWS_AS(parse_smiles("CC.CC"), FragmentError);
  ParseOptions permissive;
  permissive.keep_largest_fragment = true;
  const auto g = parse_smiles("CC.CCC", permissive);
  CHECK(g.n_atoms() == 3);
  const auto g2 = parse_smiles("CCCC.CC", permissive);
  CHECK(g2.n_atoms() == 4);
}

TEST_CASE("aromatic heteroatom hydrogen counts") {
  // pyridine nitrogen: no hydrogen
  auto g = parse_smiles("c1ccncc1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::N) CHECK(g.total_h(i) == 0);
  }
  // pyrrole [nH]: one explicit hydrogen, valid
  g = parse_smiles("c1cc[nH]c1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::N) CHECK(g.total_h(i) == 1);
  }
  // furan oxygen and thiophene sulfur: no hydrogen
  g = parse_smiles("c1ccoc1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::O) CHECK(g.total_h(i) == 0);
  }
  g = parse_smiles("c1ccsc1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::S) CHECK(g.total_h(i) == 0);
  }
  // naphthalene bridgeheads: three aromatic bonds, zero hydrogens
  g = parse_smiles("c1ccc2ccccc2c1");
  int bridgeheads = 0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.degree(i) == 3) {
      ++bridgeheads;
      CHECK(g.total_h(i) == 0);
    }
  }
  CHECK(bridgeheads == 2);
  // N-methylpyrrole ring nitrogen: no hydrogen
  g = parse_smiles("Cn1cccc1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::N) CHECK(g.total_h(i) == 0);
  }
}

TEST_CASE("charged bracket atoms") {
  auto g = parse_smiles("CC(=O)[O-]");
  CHECK(g.atoms[3].formal_charge == -1);
  CHECK(g.total_h(3) == 0);
  g = parse_smiles("[NH4+]");
  CHECK(g.n_atoms() == 1);
  CHECK(g.atoms[0].formal_charge == 1);
  CHECK(g.total_h(0) == 4);
  g = parse_smiles("C[N+](C)(C)C");
  CHECK(g.atoms[1].formal_charge == 1);
  CHECK(g.total_h(1) == 0);
  g = parse_smiles("[NH3+]CC(=O)[O-]");
  CHECK(g.atoms[0].formal_charge == 1);
  CHECK(g.total_h(0) == 3);
  // pyridinium
  g = parse_smiles("c1cc[nH+]cc1");
  for (int i = 0; i < g.n_atoms(); ++i) {
    if (g.atoms[static_cast<std::size_t>(i)].element == Elem::N) {
      CHECK(g.atoms[static_cast<std::size_t>(i)].formal_charge == 1);
      CHECK(g.total_h(i) == 1);
    }
  }
}

TEST_CASE("isotopes and stereo markers are parsed then discarded") {
  CHECK(canonical_hash(parse_smiles("[13CH4]")) == canonical_hash(parse_smiles("C")));
  CHECK(canonical_hash(parse_smiles("C/C=C/C")) == canonical_hash(parse_smiles("CC=CC")));
  CHECK(canonical_hash(parse_smiles("C[C@H](N)O")) == canonical_hash(parse_smiles("C[C@@H](N)O")));
  CHECK(canonical_hash(parse_smiles("C[C@H](N)O")) == canonical_hash(parse_smiles("CC(N)O")));
}

TEST_CASE("percent ring closures") {
  CHECK(canonical_hash(parse_smiles("C%10CCCCC%10")) == canonical_hash(parse_smiles("C1CCCCC1")));
}

TEST_CASE("distance matrix: propane path graph") {
  const auto d = distance_matrix(parse_smiles("CCC"));
  const std::vector<std::vector<int>> want = {{0, 1, 2}, {1, 0, 1}, {2, 1, 0}};
  CHECK(d == want);
}

TEST_CASE("distance matrix: single atom") {
  const auto d = distance_matrix(parse_smiles("C"));
  CHECK(d == std::vector<std::vector<int>>{{0}});
}

TEST_CASE("distance matrix: benzene max entry is 3") {
  const auto d = distance_matrix(parse_smiles("c1ccccc1"));
  int mx = 0;
  for (const auto& row : d)
    for (int v : row) mx = std::max(mx, v);
  CHECK(mx == 3);
}

TEST_CASE("distance matrix is symmetric and satisfies the triangle inequality") {
  for (const auto& smi : kMolecules) {
    const auto g = parse_smiles(smi);
    const auto d = distance_matrix(g);
    const int n = g.n_atoms();
    for (int i = 0; i < n; ++i) {
      REQUIRE(d[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] == 0);
      for (int j = 0; j < n; ++j) {
        REQUIRE(d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
        for (int k = 0; k < n; ++k) {
          REQUIRE(d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] <=
                  d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                      d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]);
        }
      }
    }
  }
}

TEST_CASE("ring info: acyclic, benzene, bridged bicyclics") {
  auto info = ring_info(parse_smiles("CCO"));
  CHECK(info.ring_count == 0);
  for (bool b : info.bond_in_ring) CHECK_FALSE(b);

  info = ring_info(parse_smiles("c1ccccc1"));
  CHECK(info.ring_count == 1);
  for (bool b : info.bond_in_ring) CHECK(b);
  for (int s : info.atom_smallest_ring) CHECK(s == 6);

  const auto g = parse_smiles("C1CC1CC2CC2");
  CHECK(g.n_bonds() == 8);
  CHECK(g.n_atoms() == 7);
  info = ring_info(g);
  CHECK(info.ring_count == 2);
  // the chain atom between the cyclopropanes lies on no ring
  CHECK(info.atom_smallest_ring[3] == 0);
  CHECK(info.atom_smallest_ring[0] == 3);
  CHECK(info.atom_smallest_ring[4] == 3);
}

TEST_CASE("ring info: spiro shares one atom between rings") {
  const auto g = parse_smiles("C1CC12CC2");
  const auto info = ring_info(g);
  CHECK(info.ring_count == 2);
  CHECK(info.atom_smallest_ring[2] == 3);
}

TEST_CASE("toluene: ring substitution leaves one ring") {
  const auto info = ring_info(parse_smiles("Cc1ccccc1"));
  CHECK(info.ring_count == 1);
  int in_ring = 0;
  for (bool b : info.bond_in_ring) in_ring += b ? 1 : 0;
  CHECK(in_ring == 6);
}

TEST_CASE("canonical hash: relabelling symmetry and formula sensitivity") {
  CHECK(canonical_hash(parse_smiles("CCO")) == canonical_hash(parse_smiles("OCC")));
  CHECK(canonical_hash(parse_smiles("CCO")) != canonical_hash(parse_smiles("CCC")));
  CHECK(canonical_hash(parse_smiles("c1ccccc1")) != canonical_hash(parse_smiles("C1CCCCC1")));
  CHECK(canonical_hash(parse_smiles("CC(C)C")) == canonical_hash(parse_smiles("C(C)(C)C")));
}

TEST_CASE("canonical hash: 1000 random relabellings of a 20-atom molecule collide") {
  const auto g = parse_smiles("CC(=O)Oc1ccc(CC(NC(C)=O)C(=O)O)cc1C");  // 20 heavy atoms
  REQUIRE(g.n_atoms() == 20);
  const Hash128 h = canonical_hash(g);
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const std::string smi = write_smiles(g, rng);
    const auto g2 = parse_smiles(smi);
    REQUIRE(canonical_hash(g2) == h);
  }
}

TEST_CASE("writer round-trips every test molecule") {
  for (const auto& smi : kMolecules) {
    CAPTURE(smi);
    const auto g = parse_smiles(smi);
    const std::string out = write_smiles(g);
    const auto g2 = parse_smiles(out);
    CHECK(g2.n_atoms() == g.n_atoms());
    CHECK(g2.n_bonds() == g.n_bonds());
    CHECK(canonical_hash(g2) == canonical_hash(g));
    int h1 = 0, h2 = 0;
    for (int i = 0; i < g.n_atoms(); ++i) h1 += g.total_h(i);
    for (int i = 0; i < g2.n_atoms(); ++i) h2 += g2.total_h(i);
    CHECK(h1 == h2);
  }
}

TEST_CASE("writer keeps the single bond between aromatic rings explicit") {
  const auto g = parse_smiles("c1ccc(-c2ccccc2)cc1");
  const std::string out = write_smiles(g);
  CHECK(out.find('-') != std::string::npos);
  CHECK(canonical_hash(parse_smiles(out)) == canonical_hash(g));
}

TEST_CASE("parse is deterministic") {
  const auto a = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  const auto b = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  CHECK(a.n_atoms() == b.n_atoms());
  CHECK(canonical_hash(a) == canonical_hash(b));
  CHECK(implicit_hs(a) == implicit_hs(b));
}

TEST_CASE("hydrogen conservation: bond sum plus hydrogens matches an allowed valence") {
  // spot-check the accounting on molecules with known hydrogen totals
  struct Row {
    const char* smi;
    int total_h;
  };
  const std::vector<Row> rows = {
      {"C", 4},           {"CC", 6},          {"CCO", 6},      {"c1ccccc1", 6},
      {"c1ccncc1", 5},    {"c1cc[nH]c1", 5},  {"c1ccoc1", 4},  {"CC(=O)O", 4},
      {"C#N", 1},         {"O=C=O", 0},       {"N", 3},        {"O", 2},
      {"CS(=O)(=O)N", 5}, {"c1ccc2ccccc2c1", 8},
  };
  for (const auto& row : rows) {
    CAPTURE(row.smi);
    const auto g = parse_smiles(row.smi);
    int total = 0;
    for (int i = 0; i < g.n_atoms(); ++i) total += g.total_h(i);
    CHECK(total == row.total_h);
  }
}
