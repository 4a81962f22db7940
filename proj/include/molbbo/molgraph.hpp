#pragma once
// SMILES parsing into validated molecular graphs, plus the graph services
// (implicit hydrogens, ring info, topological distances, invariant hashing,
// non-canonical emission) used by every downstream module.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "molbbo/elements.hpp"
#include "molbbo/rng.hpp"

namespace molbbo {

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };

// Exact integer bond-order accounting: single 2, double 4, triple 6,
// aromatic 3 (i.e. 1.5 doubled).
int twice_order(BondOrder o);

struct Atom {
  Elem element = Elem::C;
  int formal_charge = 0;
  int explicit_h = 0;    // hydrogen count from bracket notation (0 when absent)
  bool bracket = false;  // written in brackets: explicit_h is authoritative
  bool aromatic = false;
  int implicit_h = 0;    // derived during finalize
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;  // derived during finalize
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Lexical/structural problems: unbalanced brackets or branches, unknown
// element, dangling ring closure, malformed charge.
class SyntaxError : public ParseError {
 public:
  using ParseError::ParseError;
};
// Chemical validity problems: no allowed valence fits, aromatic bond between
// non-aromatic atoms, duplicate or self bonds.
class ValenceError : public ParseError {
 public:
  using ParseError::ParseError;
};
// Disconnected input while multi-fragment handling is disabled.
class FragmentError : public ParseError {
 public:
  using ParseError::ParseError;
};

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::vector<int>> adjacency;  // neighbor atom indices
  std::vector<std::vector<int>> adj_bonds;  // bond index parallel to adjacency

  int n_atoms() const { return static_cast<int>(atoms.size()); }
  int n_bonds() const { return static_cast<int>(bonds.size()); }
  int degree(int atom) const { return static_cast<int>(adjacency[static_cast<std::size_t>(atom)].size()); }
  int total_h(int atom) const {
    const Atom& a = atoms[static_cast<std::size_t>(atom)];
    return a.implicit_h + a.explicit_h;
  }
  // |bonds| - |atoms| + 1; the ring count for a connected graph.
  int cyclomatic() const { return n_bonds() - n_atoms() + 1; }
};

struct ParseOptions {
  // Default: reject multi-fragment SMILES ('.'). Permissive mode parses all
  // fragments and keeps the largest (ties: the one containing the
  // lowest-numbered atom).
  bool keep_largest_fragment = false;
};

MolecularGraph parse_smiles(const std::string& text, const ParseOptions& opts = {});

// Recomputes adjacency, implicit hydrogens, and ring flags from atoms+bonds,
// validating everything (valences, connectivity, aromatic-bond endpoints,
// duplicate bonds). Used by the parser and by GA edits. Throws ParseError
// subclasses on invalid graphs.
void finalize_graph(MolecularGraph& g);

// Implicit hydrogen count a bare (bracket-free, charge-0) atom would receive
// given its aromatic flag and doubled bond-order sum; nullopt if no allowed
// valence fits. Shared between finalize_graph and the SMILES writer.
std::optional<int> bare_implicit_h(Elem element, bool aromatic, int twice_sum);

// Symmetric matrix of unweighted shortest-path bond counts over heavy atoms.
std::vector<std::vector<int>> distance_matrix(const MolecularGraph& g);

struct RingInfo {
  int ring_count = 0;                  // cyclomatic number
  std::vector<bool> bond_in_ring;      // per bond: lies on some cycle
  std::vector<int> atom_smallest_ring; // per atom: smallest ring size, 0 if none
};

RingInfo ring_info(const MolecularGraph& g);

struct Hash128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend bool operator==(const Hash128&, const Hash128&) = default;
  friend auto operator<=>(const Hash128&, const Hash128&) = default;
};

struct Hash128Hasher {
  std::size_t operator()(const Hash128& h) const {
    return static_cast<std::size_t>(h.hi ^ (h.lo * 0x9e3779b97f4a7c15ull));
  }
};

// Per-atom colors from iterative Morgan-style neighborhood refinement run to
// a fixed point of the induced partition. Relabelling-invariant: equivalent
// atoms share a color. Feeds canonical_hash and the complexity descriptor's
// equivalence classes.
std::vector<std::uint64_t> atom_symmetry_classes(const MolecularGraph& g);

// 128-bit graph invariant: iterative neighborhood refinement to a fixed
// point, then a sorted multiset hash. Equal for atom-relabelled SMILES of the
// same molecule.
Hash128 canonical_hash(const MolecularGraph& g);

// Non-canonical SMILES emission (canonical output is out of scope). The
// default traversal is deterministic; with an Rng the start atom and child
// order are randomized, producing relabelled spellings of the same molecule.
std::string write_smiles(const MolecularGraph& g);
std::string write_smiles(const MolecularGraph& g, Rng& rng);

}  // namespace molbbo
