#include "molbbo/descriptors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "molbbo/elements.hpp"

namespace molbbo {

namespace {

constexpr std::array<std::string_view, kNumDescriptors> kNames = {
    "MolecularWeight",  "HeavyAtomCount",     "NumRings",      "NumAromaticRings",
    "NumRotatableBonds", "NumHDonors",        "NumHAcceptors", "NumHeteroatoms",
    "FractionCsp3",     "NumValenceElectrons", "BalabanJ",     "BertzCT",
    "HallKierAlpha",    "Kappa1",             "Kappa2",        "Chi0",
    "Chi1",             "fr_C_O",
};

double molecular_weight(const MolecularGraph& g) {
  const double h_mass = element_info(Elem::H).atomic_mass;
  double mw = 0.0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    mw += element_info(g.atoms[static_cast<std::size_t>(i)].element).atomic_mass;
    mw += h_mass * g.total_h(i);
  }
  return mw;
}

// Cyclomatic count of the subgraph spanned by aromatic bonds: bonds - atoms
// touched + connected components of that subgraph.
double num_aromatic_rings(const MolecularGraph& g) {
  const int n = g.n_atoms();
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int aromatic_bonds = 0;
  std::vector<char> touched(static_cast<std::size_t>(n), 0);
  for (const Bond& b : g.bonds) {
    if (b.order != BondOrder::Aromatic) continue;
    ++aromatic_bonds;
    touched[static_cast<std::size_t>(b.a)] = 1;
    touched[static_cast<std::size_t>(b.b)] = 1;
    const int ra = find(b.a);
    const int rb = find(b.b);
    if (ra != rb) parent[static_cast<std::size_t>(ra)] = rb;
  }
  int atoms_touched = 0;
  int components = 0;
  for (int i = 0; i < n; ++i) {
    if (!touched[static_cast<std::size_t>(i)]) continue;
    ++atoms_touched;
    if (find(i) == i) ++components;
  }
  return aromatic_bonds - atoms_touched + components;
}

double num_rotatable_bonds(const MolecularGraph& g) {
  int count = 0;
  for (const Bond& b : g.bonds) {
    if (b.in_ring || b.order != BondOrder::Single) continue;
    if (g.degree(b.a) >= 2 && g.degree(b.b) >= 2) ++count;
  }
  return count;
}

double fraction_csp3(const MolecularGraph& g) {
  int carbons = 0;
  int sp3 = 0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (g.atoms[u].element != Elem::C) continue;
    ++carbons;
    bool all_single = true;
    for (int bi : g.adj_bonds[u]) {
      if (g.bonds[static_cast<std::size_t>(bi)].order != BondOrder::Single) {
        all_single = false;
        break;
      }
    }
    if (all_single) ++sp3;
  }
  if (carbons == 0) return 0.0;
  return static_cast<double>(sp3) / carbons;
}

double num_valence_electrons(const MolecularGraph& g) {
  int total = 0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    total += element_info(g.atoms[static_cast<std::size_t>(i)].element).valence_electrons;
    total += g.total_h(i);  // one valence electron per hydrogen
  }
  return total;
}

std::optional<double> balaban_j(const MolecularGraph& g) {
  const int m = g.n_bonds();
  if (m == 0) return std::nullopt;
  const auto dist = distance_matrix(g);
  std::vector<double> row_sum(static_cast<std::size_t>(g.n_atoms()), 0.0);
  for (int i = 0; i < g.n_atoms(); ++i) {
    double s = 0.0;
    for (int d : dist[static_cast<std::size_t>(i)]) s += d;
    row_sum[static_cast<std::size_t>(i)] = s;
  }
  double acc = 0.0;
  for (const Bond& b : g.bonds) {
    acc += 1.0 / std::sqrt(row_sum[static_cast<std::size_t>(b.a)] *
                           row_sum[static_cast<std::size_t>(b.b)]);
  }
  const double gamma = g.cyclomatic();
  return m / (gamma + 1.0) * acc;
}

// Information-content complexity: 2*n*log2(n) - sum_i n_i*log2(n_i) over
// equivalence classes of bond pairs sharing an atom (keyed by the central
// atom's symmetry class and the sorted (bond order, far-endpoint class)
// pairs), plus the same form over heteroatoms grouped by element.
double bertz_ct(const MolecularGraph& g) {
  auto entropy_term = [](const std::vector<int>& class_sizes) {
    long total = 0;
    for (int c : class_sizes) total += c;
    if (total == 0) return 0.0;
    double acc = 2.0 * static_cast<double>(total) * std::log2(static_cast<double>(total));
    for (int c : class_sizes) {
      acc -= static_cast<double>(c) * std::log2(static_cast<double>(c));
    }
    return acc;
  };

  const std::vector<std::uint64_t> sym = atom_symmetry_classes(g);
  using ArmKey = std::pair<int, std::uint64_t>;  // (twice bond order, far endpoint class)
  std::map<std::pair<std::uint64_t, std::pair<ArmKey, ArmKey>>, int> pair_classes;
  for (int u = 0; u < g.n_atoms(); ++u) {
    const auto us = static_cast<std::size_t>(u);
    const auto& edges = g.adj_bonds[us];
    for (std::size_t e1 = 0; e1 < edges.size(); ++e1) {
      for (std::size_t e2 = e1 + 1; e2 < edges.size(); ++e2) {
        auto arm = [&](std::size_t e) {
          const Bond& b = g.bonds[static_cast<std::size_t>(edges[e])];
          const int far = b.a == u ? b.b : b.a;
          return ArmKey{twice_order(b.order), sym[static_cast<std::size_t>(far)]};
        };
        ArmKey a1 = arm(e1);
        ArmKey a2 = arm(e2);
        if (a2 < a1) std::swap(a1, a2);
        ++pair_classes[{sym[us], {a1, a2}}];
      }
    }
  }
  std::vector<int> pair_sizes;
  pair_sizes.reserve(pair_classes.size());
  for (const auto& [key, count] : pair_classes) pair_sizes.push_back(count);

  std::map<Elem, int> hetero;
  for (const Atom& a : g.atoms) {
    if (a.element != Elem::C) ++hetero[a.element];
  }
  std::vector<int> hetero_sizes;
  hetero_sizes.reserve(hetero.size());
  for (const auto& [elem, count] : hetero) hetero_sizes.push_back(count);

  return entropy_term(pair_sizes) + entropy_term(hetero_sizes);
}

double hall_kier_alpha(const MolecularGraph& g) {
  const double r_c = element_info(Elem::C).covalent_radius;
  double alpha = 0.0;
  for (const Atom& a : g.atoms) {
    alpha += element_info(a.element).covalent_radius / r_c - 1.0;
  }
  return alpha;
}

// Shape index (A+alpha)*(A+alpha-1)^2 / (P_m+alpha)^2 with P_1 = bond count
// and P_2 = two-bond path count; undefined without bonds or when the
// denominator vanishes (e.g. the path-2 variant on two-atom graphs).
std::optional<double> kappa(const MolecularGraph& g, int order) {
  if (g.n_bonds() == 0) return std::nullopt;
  double p = 0.0;
  if (order == 1) {
    p = g.n_bonds();
  } else {
    for (int i = 0; i < g.n_atoms(); ++i) {
      const double d = g.degree(i);
      p += d * (d - 1.0) / 2.0;
    }
  }
  const double a = g.n_atoms() + hall_kier_alpha(g);
  const double denom = (p + hall_kier_alpha(g)) * (p + hall_kier_alpha(g));
  if (denom < 1e-12) return std::nullopt;
  return a * (a - 1.0) * (a - 1.0) / denom;
}

double chi0(const MolecularGraph& g) {
  double acc = 0.0;
  for (int i = 0; i < g.n_atoms(); ++i) {
    const int d = g.degree(i);
    if (d > 0) acc += 1.0 / std::sqrt(static_cast<double>(d));
  }
  return acc;
}

std::optional<double> chi1(const MolecularGraph& g) {
  if (g.n_bonds() == 0) return std::nullopt;
  double acc = 0.0;
  for (const Bond& b : g.bonds) {
    acc += 1.0 / std::sqrt(static_cast<double>(g.degree(b.a)) * g.degree(b.b));
  }
  return acc;
}

double fr_c_o(const MolecularGraph& g) {
  int count = 0;
  for (const Bond& b : g.bonds) {
    const Elem ea = g.atoms[static_cast<std::size_t>(b.a)].element;
    const Elem eb = g.atoms[static_cast<std::size_t>(b.b)].element;
    if ((ea == Elem::C && eb == Elem::O) || (ea == Elem::O && eb == Elem::C)) ++count;
  }
  return count;
}

}  // namespace

std::string_view descriptor_name(DescriptorId id) {
  return kNames[static_cast<std::size_t>(id)];
}

std::optional<DescriptorId> descriptor_from_name(std::string_view name) {
  for (int i = 0; i < kNumDescriptors; ++i) {
    if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<DescriptorId>(i);
  }
  return std::nullopt;
}

DescriptorRegistry::DescriptorRegistry() {
  heldout_ = {DescriptorId::BalabanJ, DescriptorId::FractionCsp3,
              DescriptorId::NumRotatableBonds, DescriptorId::FrCO};
  for (int i = 0; i < kNumDescriptors; ++i) {
    const auto id = static_cast<DescriptorId>(i);
    all_.push_back(id);
    if (std::find(heldout_.begin(), heldout_.end(), id) == heldout_.end()) {
      train_.push_back(id);
    }
  }
}

const DescriptorRegistry& DescriptorRegistry::instance() {
  static const DescriptorRegistry registry;
  return registry;
}

bool DescriptorRegistry::is_heldout(DescriptorId id) const {
  return std::find(heldout_.begin(), heldout_.end(), id) != heldout_.end();
}

std::optional<double> compute(const MolecularGraph& g, DescriptorId id) {
  switch (id) {
    case DescriptorId::MolecularWeight:
      return molecular_weight(g);
    case DescriptorId::HeavyAtomCount:
      return g.n_atoms();
    case DescriptorId::NumRings:
      return g.cyclomatic();
    case DescriptorId::NumAromaticRings:
      return num_aromatic_rings(g);
    case DescriptorId::NumRotatableBonds:
      return num_rotatable_bonds(g);
    case DescriptorId::NumHDonors: {
      int count = 0;
      for (int i = 0; i < g.n_atoms(); ++i) {
        const Elem e = g.atoms[static_cast<std::size_t>(i)].element;
        if ((e == Elem::N || e == Elem::O) && g.total_h(i) >= 1) ++count;
      }
      return count;
    }
    case DescriptorId::NumHAcceptors: {
      int count = 0;
      for (const Atom& a : g.atoms) {
        if (a.element == Elem::N || a.element == Elem::O) ++count;
      }
      return count;
    }
    case DescriptorId::NumHeteroatoms: {
      int count = 0;
      for (const Atom& a : g.atoms) {
        if (a.element != Elem::C) ++count;
      }
      return count;
    }
    case DescriptorId::FractionCsp3:
      return fraction_csp3(g);
    case DescriptorId::NumValenceElectrons:
      return num_valence_electrons(g);
    case DescriptorId::BalabanJ:
      return balaban_j(g);
    case DescriptorId::BertzCT:
      return bertz_ct(g);
    case DescriptorId::HallKierAlpha:
      return hall_kier_alpha(g);
    case DescriptorId::Kappa1:
      return kappa(g, 1);
    case DescriptorId::Kappa2:
      return kappa(g, 2);
    case DescriptorId::Chi0:
      return chi0(g);
    case DescriptorId::Chi1:
      return chi1(g);
    case DescriptorId::FrCO:
      return fr_c_o(g);
  }
  return std::nullopt;
}

std::vector<double> compute_all(const MolecularGraph& g) {
  std::vector<double> out(kNumDescriptors, undefined_value());
  for (int i = 0; i < kNumDescriptors; ++i) {
    if (const auto v = compute(g, static_cast<DescriptorId>(i))) {
      out[static_cast<std::size_t>(i)] = *v;
    }
  }
  return out;
}

double undefined_value() { return std::numeric_limits<double>::quiet_NaN(); }

bool is_undefined(double v) { return std::isnan(v); }

}  // namespace molbbo
