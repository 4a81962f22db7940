#include "molbbo/elements.hpp"

#include <cstdlib>

namespace molbbo {

namespace {
constexpr std::array<ElementInfo, kNumElements> kTable = {{
    {Elem::B, "B", 10.811, {3, 0, 0}, 1, 3, 0.84, true, true},
    {Elem::C, "C", 12.011, {4, 0, 0}, 1, 4, 0.76, true, true},
    {Elem::N, "N", 14.007, {3, 5, 0}, 2, 5, 0.71, true, true},
    {Elem::O, "O", 15.999, {2, 0, 0}, 1, 6, 0.66, true, true},
    {Elem::P, "P", 30.974, {3, 5, 0}, 2, 5, 1.07, true, true},
    {Elem::S, "S", 32.066, {2, 4, 6}, 3, 6, 1.05, true, true},
    {Elem::F, "F", 18.998, {1, 0, 0}, 1, 7, 0.57, true, false},
    {Elem::Cl, "Cl", 35.453, {1, 0, 0}, 1, 7, 1.02, true, false},
    {Elem::Br, "Br", 79.904, {1, 0, 0}, 1, 7, 1.20, true, false},
    {Elem::I, "I", 126.904, {1, 0, 0}, 1, 7, 1.39, true, false},
    {Elem::H, "H", 1.008, {1, 0, 0}, 1, 1, 0.31, false, false},
}};
}  // namespace

const ElementInfo& element_info(Elem e) {
  return kTable[static_cast<std::size_t>(e)];
}

std::optional<Elem> element_from_symbol(std::string_view symbol) {
  for (const auto& info : kTable) {
    if (info.symbol == symbol) return info.id;
  }
  return std::nullopt;
}

std::vector<int> allowed_valences(Elem e, int formal_charge) {
  const ElementInfo& info = element_info(e);
  int shift = 0;
  if (e == Elem::B) {
    shift = -formal_charge;
  } else if (e == Elem::C) {
    shift = -std::abs(formal_charge);
  } else if (info.valence_electrons >= 5) {
    shift = formal_charge;
  }
  std::vector<int> out;
  for (int i = 0; i < info.n_valences; ++i) {
    const int v = info.valences[static_cast<std::size_t>(i)] + shift;
    if (v > 0) out.push_back(v);
  }
  return out;
}

}  // namespace molbbo
