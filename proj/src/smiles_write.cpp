#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "molbbo/molgraph.hpp"

namespace molbbo {

namespace {

struct Writer {
  const MolecularGraph& g;
  Rng* rng;  // null: deterministic traversal

  std::vector<bool> visited;
  std::vector<std::vector<int>> tree_children;       // atom -> child atoms
  std::vector<std::vector<int>> tree_child_bonds;    // parallel bond indices
  std::vector<std::vector<int>> closure_bonds;       // atom -> ring bond indices
  std::vector<int> closure_number;                   // bond -> digit (-1 unused)
  std::vector<bool> closure_opened;                  // bond -> first end emitted
  int next_closure = 1;
  std::string out;

  explicit Writer(const MolecularGraph& graph, Rng* r) : g(graph), rng(r) {
    const auto n = static_cast<std::size_t>(g.n_atoms());
    visited.assign(n, false);
    tree_children.assign(n, {});
    tree_child_bonds.assign(n, {});
    closure_bonds.assign(n, {});
    closure_number.assign(static_cast<std::size_t>(g.n_bonds()), -1);
    closure_opened.assign(static_cast<std::size_t>(g.n_bonds()), false);
  }

  std::vector<std::size_t> edge_order(int atom) {
    const auto deg = g.adjacency[static_cast<std::size_t>(atom)].size();
    std::vector<std::size_t> order(deg);
    for (std::size_t i = 0; i < deg; ++i) order[i] = i;
    if (rng) {
      for (std::size_t i = deg; i > 1; --i) {
        std::swap(order[i - 1], order[rng->index(i)]);
      }
    }
    return order;
  }

  // Iterative DFS building the spanning tree and collecting ring-closure
  // (back-edge) bonds in traversal order.
  void build_tree(int start) {
    struct Frame {
      int atom;
      int parent_bond;
      std::vector<std::size_t> order;
      std::size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({start, -1, edge_order(start), 0});
    visited[static_cast<std::size_t>(start)] = true;
    std::vector<bool> bond_used(static_cast<std::size_t>(g.n_bonds()), false);
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto u = static_cast<std::size_t>(f.atom);
      if (f.next >= f.order.size()) {
        stack.pop_back();
        continue;
      }
      const std::size_t e = f.order[f.next++];
      const int v = g.adjacency[u][e];
      const int bond = g.adj_bonds[u][e];
      if (bond == f.parent_bond || bond_used[static_cast<std::size_t>(bond)]) continue;
      bond_used[static_cast<std::size_t>(bond)] = true;
      if (!visited[static_cast<std::size_t>(v)]) {
        visited[static_cast<std::size_t>(v)] = true;
        tree_children[u].push_back(v);
        tree_child_bonds[u].push_back(bond);
        stack.push_back({v, bond, edge_order(v), 0});
      } else {
        closure_bonds[u].push_back(bond);
        closure_bonds[static_cast<std::size_t>(v)].push_back(bond);
      }
    }
  }

  std::string bond_symbol(const Bond& b) const {
    switch (b.order) {
      case BondOrder::Single:
        // implied, except between two aromatic atoms where omission would
        // read back as an aromatic bond
        if (g.atoms[static_cast<std::size_t>(b.a)].aromatic &&
            g.atoms[static_cast<std::size_t>(b.b)].aromatic) {
          return "-";
        }
        return "";
      case BondOrder::Double: return "=";
      case BondOrder::Triple: return "#";
      case BondOrder::Aromatic: return "";  // endpoints are aromatic by invariant
    }
    return "";
  }

  std::string atom_token(int idx) const {
    const Atom& a = g.atoms[static_cast<std::size_t>(idx)];
    const ElementInfo& info = element_info(a.element);
    std::string sym(info.symbol);
    if (a.aromatic) {
      for (char& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    int twice_sum = 0;
    for (int bi : g.adj_bonds[static_cast<std::size_t>(idx)]) {
      twice_sum += twice_order(g.bonds[static_cast<std::size_t>(bi)].order);
    }
    const int h = g.total_h(idx);
    if (a.formal_charge == 0 && info.organic_subset &&
        bare_implicit_h(a.element, a.aromatic, twice_sum) == std::optional<int>(h)) {
      return sym;
    }
    std::string t = "[" + sym;
    if (h == 1) {
      t += "H";
    } else if (h > 1) {
      t += "H" + std::to_string(h);
    }
    if (a.formal_charge != 0) {
      t += a.formal_charge > 0 ? "+" : "-";
      const int mag = std::abs(a.formal_charge);
      if (mag > 1) t += std::to_string(mag);
    }
    t += "]";
    return t;
  }

  std::string closure_token(int bond_idx) {
    std::string t;
    const auto b = static_cast<std::size_t>(bond_idx);
    if (!closure_opened[b]) {
      closure_opened[b] = true;
      closure_number[b] = next_closure++;
      t += bond_symbol(g.bonds[b]);  // order carried by the first occurrence
    }
    const int num = closure_number[b];
    if (num >= 100) throw std::runtime_error("more than 99 ring closures");
    if (num >= 10) {
      t += "%" + std::to_string(num);
    } else {
      t += std::to_string(num);
    }
    return t;
  }

  void emit(int start) {
    struct Item {
      int atom;
      std::string prefix;   // bond symbol (and '(' when branching)
      std::string suffix;   // ')' when branching
    };
    std::vector<Item> stack{{start, "", ""}};
    while (!stack.empty()) {
      Item it = stack.back();
      stack.pop_back();
      if (it.atom < 0) {
        out += it.suffix;
        continue;
      }
      out += it.prefix;
      out += atom_token(it.atom);
      const auto u = static_cast<std::size_t>(it.atom);
      for (int bi : closure_bonds[u]) out += closure_token(bi);
      if (!it.suffix.empty()) stack.push_back({-1, "", it.suffix});
      const auto& kids = tree_children[u];
      const auto& kbonds = tree_child_bonds[u];
      for (std::size_t c = kids.size(); c-- > 0;) {
        const std::string sym = bond_symbol(g.bonds[static_cast<std::size_t>(kbonds[c])]);
        const bool last = (c + 1 == kids.size());
        if (last) {
          stack.push_back({kids[c], sym, ""});
        } else {
          stack.push_back({kids[c], "(" + sym, ")"});
        }
      }
    }
  }

  std::string run() {
    const int start = rng ? static_cast<int>(rng->index(static_cast<std::size_t>(g.n_atoms()))) : 0;
    build_tree(start);
    emit(start);
    return out;
  }
};

}  // namespace

std::string write_smiles(const MolecularGraph& g) {
  Writer w(g, nullptr);
  return w.run();
}

std::string write_smiles(const MolecularGraph& g, Rng& rng) {
  Writer w(g, &rng);
  return w.run();
}

}  // namespace molbbo
