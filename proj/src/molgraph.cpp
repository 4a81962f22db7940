#include "molbbo/molgraph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <queue>
#include <set>
#include <utility>

namespace molbbo {

int twice_order(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
  }
  return 2;
}

namespace {

// Nearest integer to twice_sum/2, half rounded to even (4.5 -> 4, 3.5 -> 4).
int round_half_even(int twice_sum) {
  if (twice_sum % 2 == 0) return twice_sum / 2;
  const int lower = twice_sum / 2;
  return (lower % 2 == 0) ? lower : lower + 1;
}

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
};

class Parser {
 public:
  Parser(const std::string& text, const ParseOptions& opts) : text_(text), opts_(opts) {}

  MolecularGraph parse() {
    if (text_.empty()) throw SyntaxError("empty SMILES");
    while (pos_ < text_.size()) step();
    if (!branch_stack_.empty()) throw SyntaxError("unclosed branch '('");
    if (!ring_open_.empty()) throw SyntaxError("dangling ring-closure digit");
    if (pending_) throw SyntaxError("trailing bond symbol");
    if (g_.atoms.empty()) throw SyntaxError("no atoms");
    if (saw_dot_ && opts_.keep_largest_fragment) keep_largest_fragment();
    finalize_graph(g_);
    return std::move(g_);
  }

 private:
  [[noreturn]] void fail_syntax(const std::string& msg) {
    throw SyntaxError(msg + " at position " + std::to_string(pos_));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void step() {
    const char c = text_[pos_];
    switch (c) {
      case 'C':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
          add_bare(Elem::Cl, false);
          pos_ += 2;
        } else {
          add_bare(Elem::C, false);
          ++pos_;
        }
        return;
      case 'B':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
          add_bare(Elem::Br, false);
          pos_ += 2;
        } else {
          add_bare(Elem::B, false);
          ++pos_;
        }
        return;
      case 'N': add_bare(Elem::N, false); ++pos_; return;
      case 'O': add_bare(Elem::O, false); ++pos_; return;
      case 'P': add_bare(Elem::P, false); ++pos_; return;
      case 'S': add_bare(Elem::S, false); ++pos_; return;
      case 'F': add_bare(Elem::F, false); ++pos_; return;
      case 'I': add_bare(Elem::I, false); ++pos_; return;
      case 'b': add_bare(Elem::B, true); ++pos_; return;
      case 'c': add_bare(Elem::C, true); ++pos_; return;
      case 'n': add_bare(Elem::N, true); ++pos_; return;
      case 'o': add_bare(Elem::O, true); ++pos_; return;
      case 'p': add_bare(Elem::P, true); ++pos_; return;
      case 's': add_bare(Elem::S, true); ++pos_; return;
      case '[': parse_bracket(); return;
      case '-': set_pending(BondOrder::Single); ++pos_; return;
      case '/': set_pending(BondOrder::Single); ++pos_; return;   // stereo discarded
      case '\\': set_pending(BondOrder::Single); ++pos_; return;  // stereo discarded
      case '=': set_pending(BondOrder::Double); ++pos_; return;
      case '#': set_pending(BondOrder::Triple); ++pos_; return;
      case ':': set_pending(BondOrder::Aromatic); ++pos_; return;
      case '(':
        if (prev_ < 0) fail_syntax("branch before any atom");
        if (pending_) fail_syntax("bond symbol before '('");
        branch_stack_.push_back(prev_);
        ++pos_;
        return;
      case ')':
        if (branch_stack_.empty()) fail_syntax("unmatched ')'");
        if (pending_) fail_syntax("bond symbol before ')'");
        prev_ = branch_stack_.back();
        branch_stack_.pop_back();
        ++pos_;
        return;
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
          fail_syntax("'%' needs two digits");
        }
        const int num = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_closure(num);
        pos_ += 3;
        return;
      }
      case '.':
        if (!opts_.keep_largest_fragment) {
          throw FragmentError("multi-fragment SMILES ('.') rejected; enable keep_largest_fragment");
        }
        if (pending_) fail_syntax("bond symbol before '.'");
        if (!branch_stack_.empty()) fail_syntax("'.' inside a branch");
        saw_dot_ = true;
        prev_ = -1;
        ++pos_;
        return;
      default:
        if (std::isdigit(static_cast<unsigned char>(c))) {
          ring_closure(c - '0');
          ++pos_;
          return;
        }
        fail_syntax(std::string("unexpected character '") + c + "'");
    }
  }

  void set_pending(BondOrder o) {
    if (pending_) fail_syntax("two consecutive bond symbols");
    if (prev_ < 0) fail_syntax("bond symbol before any atom");
    pending_ = o;
  }

  void add_bare(Elem e, bool aromatic) {
    Atom a;
    a.element = e;
    a.aromatic = aromatic;
    add_atom(a);
  }

  void add_atom(const Atom& atom) {
    g_.atoms.push_back(atom);
    const int idx = static_cast<int>(g_.atoms.size()) - 1;
    if (prev_ >= 0) {
      Bond b;
      b.a = prev_;
      b.b = idx;
      b.order = resolve_order(pending_, prev_, idx);
      g_.bonds.push_back(b);
    }
    pending_.reset();
    prev_ = idx;
  }

  BondOrder resolve_order(const std::optional<BondOrder>& pending, int a, int b) const {
    if (pending) return *pending;
    if (g_.atoms[static_cast<std::size_t>(a)].aromatic && g_.atoms[static_cast<std::size_t>(b)].aromatic) {
      return BondOrder::Aromatic;
    }
    return BondOrder::Single;
  }

  void ring_closure(int num) {
    if (prev_ < 0) fail_syntax("ring closure before any atom");
    auto it = ring_open_.find(num);
    if (it == ring_open_.end()) {
      ring_open_[num] = RingOpen{prev_, pending_};
      pending_.reset();
      return;
    }
    const RingOpen open = it->second;
    ring_open_.erase(it);
    if (open.atom == prev_) throw ValenceError("ring closure bonds an atom to itself");
    if (open.order && pending_ && *open.order != *pending_) {
      fail_syntax("conflicting bond orders on ring closure");
    }
    std::optional<BondOrder> order = open.order ? open.order : pending_;
    Bond b;
    b.a = open.atom;
    b.b = prev_;
    b.order = resolve_order(order, open.atom, prev_);
    g_.bonds.push_back(b);
    pending_.reset();
  }

  void parse_bracket() {
    ++pos_;  // consume '['
    // isotope: parsed then ignored
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Atom atom;
    atom.bracket = true;
    if (pos_ >= text_.size()) fail_syntax("unterminated bracket atom");
    // element symbol, two-letter first
    bool found = false;
    if (pos_ + 1 < text_.size()) {
      const std::string two = text_.substr(pos_, 2);
      if (two == "Cl" || two == "Br") {
        atom.element = *element_from_symbol(two);
        pos_ += 2;
        found = true;
      }
    }
    if (!found) {
      const char c = text_[pos_];
      switch (c) {
        case 'B': atom.element = Elem::B; break;
        case 'C': atom.element = Elem::C; break;
        case 'N': atom.element = Elem::N; break;
        case 'O': atom.element = Elem::O; break;
        case 'P': atom.element = Elem::P; break;
        case 'S': atom.element = Elem::S; break;
        case 'F': atom.element = Elem::F; break;
        case 'I': atom.element = Elem::I; break;
        case 'b': atom.element = Elem::B; atom.aromatic = true; break;
        case 'c': atom.element = Elem::C; atom.aromatic = true; break;
        case 'n': atom.element = Elem::N; atom.aromatic = true; break;
        case 'o': atom.element = Elem::O; atom.aromatic = true; break;
        case 'p': atom.element = Elem::P; atom.aromatic = true; break;
        case 's': atom.element = Elem::S; atom.aromatic = true; break;
        case 'H': fail_syntax("explicit hydrogen atoms are unsupported");
        default: fail_syntax("unknown element in bracket");
      }
      ++pos_;
    }
    // chirality: parsed then discarded
    if (peek() == '@') {
      ++pos_;
      if (peek() == '@') ++pos_;
    }
    // hydrogen count
    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = peek() - '0';
        ++pos_;
      }
      atom.explicit_h = h;
    }
    // formal charge
    if (peek() == '+' || peek() == '-') {
      const char sign_char = peek();
      const int sign = sign_char == '+' ? 1 : -1;
      ++pos_;
      int magnitude = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        magnitude = peek() - '0';
        ++pos_;
      } else {
        while (peek() == sign_char) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.formal_charge = sign * magnitude;
    }
    if (peek() != ']') fail_syntax("expected ']'");
    ++pos_;
    add_atom(atom);
  }

  void keep_largest_fragment() {
    const int n = static_cast<int>(g_.atoms.size());
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const Bond& b : g_.bonds) {
      adj[static_cast<std::size_t>(b.a)].push_back(b.b);
      adj[static_cast<std::size_t>(b.b)].push_back(b.a);
    }
    int n_comp = 0;
    std::vector<int> sizes;
    for (int s = 0; s < n; ++s) {
      if (comp[static_cast<std::size_t>(s)] >= 0) continue;
      int size = 0;
      std::queue<int> q;
      q.push(s);
      comp[static_cast<std::size_t>(s)] = n_comp;
      while (!q.empty()) {
        const int u = q.front();
        q.pop();
        ++size;
        for (int v : adj[static_cast<std::size_t>(u)]) {
          if (comp[static_cast<std::size_t>(v)] < 0) {
            comp[static_cast<std::size_t>(v)] = n_comp;
            q.push(v);
          }
        }
      }
      sizes.push_back(size);
      ++n_comp;
    }
    int best = 0;
    for (int i = 1; i < n_comp; ++i) {
      if (sizes[static_cast<std::size_t>(i)] > sizes[static_cast<std::size_t>(best)]) best = i;
    }
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    MolecularGraph kept;
    for (int i = 0; i < n; ++i) {
      if (comp[static_cast<std::size_t>(i)] == best) {
        remap[static_cast<std::size_t>(i)] = static_cast<int>(kept.atoms.size());
        kept.atoms.push_back(g_.atoms[static_cast<std::size_t>(i)]);
      }
    }
    for (const Bond& b : g_.bonds) {
      if (comp[static_cast<std::size_t>(b.a)] == best) {
        Bond nb = b;
        nb.a = remap[static_cast<std::size_t>(b.a)];
        nb.b = remap[static_cast<std::size_t>(b.b)];
        kept.bonds.push_back(nb);
      }
    }
    g_ = std::move(kept);
  }

  const std::string& text_;
  ParseOptions opts_;
  MolecularGraph g_;
  std::size_t pos_ = 0;
  int prev_ = -1;
  std::vector<int> branch_stack_;
  std::optional<BondOrder> pending_;
  std::map<int, RingOpen> ring_open_;
  bool saw_dot_ = false;
};

void find_ring_bonds(MolecularGraph& g) {
  // A bond lies on a cycle iff it is not a bridge (iterative low-link DFS).
  const int n = g.n_atoms();
  std::vector<int> disc(static_cast<std::size_t>(n), -1);
  std::vector<int> low(static_cast<std::size_t>(n), 0);
  for (Bond& b : g.bonds) b.in_ring = true;
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next_edge;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[static_cast<std::size_t>(root)] >= 0) continue;
    std::vector<Frame> stack{{root, -1, 0}};
    disc[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto u = static_cast<std::size_t>(f.atom);
      if (f.next_edge < g.adjacency[u].size()) {
        const std::size_t e = f.next_edge++;
        const int v = g.adjacency[u][e];
        const int bond = g.adj_bonds[u][e];
        if (bond == f.parent_bond) continue;
        if (disc[static_cast<std::size_t>(v)] < 0) {
          disc[static_cast<std::size_t>(v)] = low[static_cast<std::size_t>(v)] = timer++;
          stack.push_back({v, bond, 0});
        } else {
          low[u] = std::min(low[u], disc[static_cast<std::size_t>(v)]);
        }
      } else {
        stack.pop_back();
        if (!stack.empty()) {
          const Frame& pf = stack.back();
          const auto p = static_cast<std::size_t>(pf.atom);
          low[p] = std::min(low[p], low[u]);
          if (low[u] > disc[p]) {
            g.bonds[static_cast<std::size_t>(f.parent_bond)].in_ring = false;  // bridge
          }
        }
      }
    }
  }
}

}  // namespace

MolecularGraph parse_smiles(const std::string& text, const ParseOptions& opts) {
  Parser p(text, opts);
  return p.parse();
}

std::optional<int> bare_implicit_h(Elem element, bool aromatic, int twice_sum) {
  const int eff = round_half_even(twice_sum);
  const std::vector<int> allowed = allowed_valences(element, 0);
  if (aromatic) {
    // Exact fit first, then the ring-lone-pair reading (one aromatic
    // half-order absorbed by the ring), then hydrogens on the smallest
    // valence that fits.
    if (contains(allowed, eff)) return 0;
    if (contains(allowed, eff - 1)) return 0;
  }
  for (int v : allowed) {
    if (v >= eff) return v - eff;
  }
  return std::nullopt;
}

void finalize_graph(MolecularGraph& g) {
  const int n = g.n_atoms();
  if (n == 0) throw ValenceError("empty graph");
  std::set<std::pair<int, int>> seen_pairs;
  for (const Bond& b : g.bonds) {
    if (b.a < 0 || b.a >= n || b.b < 0 || b.b >= n) throw ValenceError("bond endpoint out of range");
    if (b.a == b.b) throw ValenceError("bond joins an atom to itself");
    const auto key = std::minmax(b.a, b.b);
    if (!seen_pairs.insert(key).second) throw ValenceError("duplicate bond between one atom pair");
    if (b.order == BondOrder::Aromatic &&
        (!g.atoms[static_cast<std::size_t>(b.a)].aromatic || !g.atoms[static_cast<std::size_t>(b.b)].aromatic)) {
      throw ValenceError("aromatic bond joins a non-aromatic atom");
    }
  }
  g.adjacency.assign(static_cast<std::size_t>(n), {});
  g.adj_bonds.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < g.n_bonds(); ++i) {
    const Bond& b = g.bonds[static_cast<std::size_t>(i)];
    g.adjacency[static_cast<std::size_t>(b.a)].push_back(b.b);
    g.adj_bonds[static_cast<std::size_t>(b.a)].push_back(i);
    g.adjacency[static_cast<std::size_t>(b.b)].push_back(b.a);
    g.adj_bonds[static_cast<std::size_t>(b.b)].push_back(i);
  }
  // connectivity
  {
    std::vector<bool> vis(static_cast<std::size_t>(n), false);
    std::queue<int> q;
    q.push(0);
    vis[0] = true;
    int count = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : g.adjacency[static_cast<std::size_t>(u)]) {
        if (!vis[static_cast<std::size_t>(v)]) {
          vis[static_cast<std::size_t>(v)] = true;
          ++count;
          q.push(v);
        }
      }
    }
    if (count != n) throw FragmentError("graph is disconnected");
  }
  // implicit hydrogens + valence validation
  for (int i = 0; i < n; ++i) {
    Atom& a = g.atoms[static_cast<std::size_t>(i)];
    int twice_sum = 0;
    for (int bi : g.adj_bonds[static_cast<std::size_t>(i)]) {
      twice_sum += twice_order(g.bonds[static_cast<std::size_t>(bi)].order);
    }
    if (a.bracket) {
      a.implicit_h = 0;
      const int eff = round_half_even(twice_sum);
      const std::vector<int> allowed = allowed_valences(a.element, a.formal_charge);
      bool ok = contains(allowed, eff + a.explicit_h);
      if (!ok && a.aromatic) ok = contains(allowed, eff - 1 + a.explicit_h);
      if (!ok) {
        throw ValenceError(std::string("no allowed valence fits bracket atom ") +
                           std::string(element_info(a.element).symbol) + " at index " + std::to_string(i));
      }
    } else {
      if (a.formal_charge != 0) throw ValenceError("charged atom outside brackets");
      const std::optional<int> h = bare_implicit_h(a.element, a.aromatic, twice_sum);
      if (!h) {
        throw ValenceError(std::string("no allowed valence fits atom ") +
                           std::string(element_info(a.element).symbol) + " at index " + std::to_string(i));
      }
      a.implicit_h = *h;
    }
  }
  find_ring_bonds(g);
}

std::vector<std::vector<int>> distance_matrix(const MolecularGraph& g) {
  const int n = g.n_atoms();
  std::vector<std::vector<int>> d(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int s = 0; s < n; ++s) {
    auto& row = d[static_cast<std::size_t>(s)];
    row[static_cast<std::size_t>(s)] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : g.adjacency[static_cast<std::size_t>(u)]) {
        if (row[static_cast<std::size_t>(v)] < 0) {
          row[static_cast<std::size_t>(v)] = row[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
  }
  return d;
}

RingInfo ring_info(const MolecularGraph& g) {
  RingInfo info;
  info.ring_count = g.cyclomatic();
  info.bond_in_ring.resize(static_cast<std::size_t>(g.n_bonds()));
  for (int i = 0; i < g.n_bonds(); ++i) {
    info.bond_in_ring[static_cast<std::size_t>(i)] = g.bonds[static_cast<std::size_t>(i)].in_ring;
  }
  info.atom_smallest_ring.assign(static_cast<std::size_t>(g.n_atoms()), 0);
  // Smallest ring through a bond (u,v): 1 + shortest u-v path avoiding that
  // bond. Smallest ring through an atom: min over its in-ring bonds.
  for (int bi = 0; bi < g.n_bonds(); ++bi) {
    const Bond& b = g.bonds[static_cast<std::size_t>(bi)];
    if (!b.in_ring) continue;
    std::vector<int> dist(static_cast<std::size_t>(g.n_atoms()), -1);
    dist[static_cast<std::size_t>(b.a)] = 0;
    std::queue<int> q;
    q.push(b.a);
    while (!q.empty() && dist[static_cast<std::size_t>(b.b)] < 0) {
      const int u = q.front();
      q.pop();
      const auto& nbrs = g.adjacency[static_cast<std::size_t>(u)];
      const auto& nbonds = g.adj_bonds[static_cast<std::size_t>(u)];
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        if (nbonds[e] == bi) continue;
        const int v = nbrs[e];
        if (dist[static_cast<std::size_t>(v)] < 0) {
          dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
    const int cycle = dist[static_cast<std::size_t>(b.b)] + 1;
    for (int atom : {b.a, b.b}) {
      int& slot = info.atom_smallest_ring[static_cast<std::size_t>(atom)];
      if (slot == 0 || cycle < slot) slot = cycle;
    }
  }
  return info;
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
}

}  // namespace

std::vector<std::uint64_t> atom_symmetry_classes(const MolecularGraph& g) {
  const int n = g.n_atoms();
  std::vector<std::uint64_t> color(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Atom& a = g.atoms[static_cast<std::size_t>(i)];
    std::uint64_t c = combine(0x6d6f6c626260ull, static_cast<std::uint64_t>(a.element));
    c = combine(c, static_cast<std::uint64_t>(a.formal_charge + 16));
    c = combine(c, static_cast<std::uint64_t>(g.total_h(i)));
    c = combine(c, a.aromatic ? 1u : 0u);
    c = combine(c, static_cast<std::uint64_t>(g.degree(i)));
    color[static_cast<std::size_t>(i)] = c;
  }
  auto distinct = [&] {
    std::vector<std::uint64_t> s = color;
    std::sort(s.begin(), s.end());
    return std::unique(s.begin(), s.end()) - s.begin();
  };
  std::int64_t n_classes = distinct();
  std::vector<std::uint64_t> next(static_cast<std::size_t>(n));
  for (int round = 0; round < n; ++round) {
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      std::vector<std::uint64_t> nbrs;
      nbrs.reserve(g.adjacency[u].size());
      for (std::size_t e = 0; e < g.adjacency[u].size(); ++e) {
        const int v = g.adjacency[u][e];
        const int bi = g.adj_bonds[u][e];
        nbrs.push_back(combine(color[static_cast<std::size_t>(v)],
                               static_cast<std::uint64_t>(twice_order(g.bonds[static_cast<std::size_t>(bi)].order))));
      }
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t c = color[u];
      for (std::uint64_t x : nbrs) c = combine(c, x);
      next[u] = c;
    }
    std::swap(color, next);
    const std::int64_t nc = distinct();
    if (nc == n_classes) break;  // partition refined to a fixed point
    n_classes = nc;
  }
  return color;
}

Hash128 canonical_hash(const MolecularGraph& g) {
  const int n = g.n_atoms();
  const std::vector<std::uint64_t> color = atom_symmetry_classes(g);
  std::vector<std::uint64_t> atom_colors = color;
  std::sort(atom_colors.begin(), atom_colors.end());
  std::vector<std::uint64_t> bond_colors;
  bond_colors.reserve(g.bonds.size());
  for (const Bond& b : g.bonds) {
    const std::uint64_t cu = color[static_cast<std::size_t>(b.a)];
    const std::uint64_t cv = color[static_cast<std::size_t>(b.b)];
    std::uint64_t bc = combine(std::min(cu, cv), std::max(cu, cv));
    bc = combine(bc, static_cast<std::uint64_t>(twice_order(b.order)));
    bond_colors.push_back(bc);
  }
  std::sort(bond_colors.begin(), bond_colors.end());
  Hash128 h;
  h.lo = combine(0x1f0e1d2c3b4a5968ull, static_cast<std::uint64_t>(n));
  h.hi = combine(0x8c7b6a5948372615ull, static_cast<std::uint64_t>(g.n_bonds()));
  for (std::uint64_t c : atom_colors) {
    h.lo = combine(h.lo, c);
    h.hi = combine(h.hi, ~c);
  }
  for (std::uint64_t c : bond_colors) {
    h.lo = combine(h.lo, c);
    h.hi = combine(h.hi, ~c);
  }
  return h;
}

}  // namespace molbbo
