#pragma once
// Element data for the supported subset: B, C, N, O, P, S, F, Cl, Br, I, H.
// The compiled-in table is the single runtime source of truth; the bundled
// data/elements.tsv mirrors it column-for-column (a test asserts equivalence).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace molbbo {

enum class Elem : std::uint8_t { B, C, N, O, P, S, F, Cl, Br, I, H, Count };

inline constexpr int kNumElements = static_cast<int>(Elem::Count);

struct ElementInfo {
  Elem id;
  std::string_view symbol;
  double atomic_mass;                 // unified atomic mass units
  std::array<int, 3> valences;        // allowed valences, ascending; 0 = unused slot
  int n_valences;
  int valence_electrons;
  double covalent_radius;             // angstrom; drives the Hall-Kier alpha term
  bool organic_subset;                // writable without brackets
  bool aromatic_allowed;              // lowercase form accepted
};

const ElementInfo& element_info(Elem e);

// Symbol lookup; matches exact case ("Cl", "Br", ...). Returns nullopt for
// unknown symbols.
std::optional<Elem> element_from_symbol(std::string_view symbol);

// Allowed valences adjusted for formal charge:
//   B: base - charge;  C: base - |charge|;  >=5 valence electrons: base + charge.
// Non-positive adjusted valences are dropped.
std::vector<int> allowed_valences(Elem e, int formal_charge);

}  // namespace molbbo
