#include "molbbo/optimize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "molbbo/gp.hpp"

namespace molbbo {

namespace {

constexpr std::uint64_t kRunTag = 0x52554e4f5054ull;  // run-level stream
constexpr std::uint64_t kGenTag = 0x47454e4341ull;    // candidate-generation stream

constexpr int kCrossoverAttempts = 10;
constexpr int kMutateAttempts = 10;
constexpr int kAttemptsPerCandidate = 50;

// Elements offered by the element-swap and atom-append edits.
constexpr std::array<Elem, 7> kEditElements = {Elem::C,  Elem::N, Elem::O, Elem::F,
                                               Elem::S,  Elem::Cl, Elem::Br};

// Rebuilds all derived state (adjacency, implicit hydrogens, ring flags) and
// runs full validation; empty on any structural rejection.
std::optional<MolecularGraph> finalize_child(std::vector<Atom> atoms, std::vector<Bond> bonds) {
  MolecularGraph g;
  g.atoms = std::move(atoms);
  g.bonds = std::move(bonds);
  try {
    finalize_graph(g);
  } catch (const ParseError&) {
    return std::nullopt;
  }
  return g;
}

std::vector<int> cuttable_bonds(const MolecularGraph& g) {
  std::vector<int> out;
  for (int i = 0; i < g.n_bonds(); ++i) {
    const Bond& b = g.bonds[static_cast<std::size_t>(i)];
    if (b.order == BondOrder::Single && !b.in_ring) out.push_back(i);
  }
  return out;
}

// Atom indices of the connected fragment containing `start` once bond
// `cut_bond` is removed.  The parent graph is connected, so this is one side
// of the cut.
std::vector<int> fragment_atoms(const MolecularGraph& g, int cut_bond, int start) {
  std::vector<char> visited(static_cast<std::size_t>(g.n_atoms()), 0);
  std::vector<int> stack{start};
  std::vector<int> frag;
  visited[static_cast<std::size_t>(start)] = 1;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    frag.push_back(a);
    const auto& nbrs = g.adjacency[static_cast<std::size_t>(a)];
    const auto& nbr_bonds = g.adj_bonds[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (nbr_bonds[i] == cut_bond) continue;
      const int b = nbrs[i];
      if (!visited[static_cast<std::size_t>(b)]) {
        visited[static_cast<std::size_t>(b)] = 1;
        stack.push_back(b);
      }
    }
  }
  return frag;
}

struct Fragment {
  std::vector<int> atoms;  // parent atom indices
  int join = 0;            // parent index of the atom that lost its neighbor
};

// Copies a fragment's atoms and internal bonds into `atoms`/`bonds`,
// returning the child index of the fragment's join atom.
int append_fragment(const MolecularGraph& parent, const Fragment& frag,
                    std::vector<Atom>& atoms, std::vector<Bond>& bonds) {
  std::vector<int> child_index(static_cast<std::size_t>(parent.n_atoms()), -1);
  for (const int a : frag.atoms) {
    child_index[static_cast<std::size_t>(a)] = static_cast<int>(atoms.size());
    atoms.push_back(parent.atoms[static_cast<std::size_t>(a)]);
  }
  for (const Bond& b : parent.bonds) {
    const int ca = child_index[static_cast<std::size_t>(b.a)];
    const int cb = child_index[static_cast<std::size_t>(b.b)];
    if (ca >= 0 && cb >= 0) {
      Bond copy = b;
      copy.a = ca;
      copy.b = cb;
      bonds.push_back(copy);
    }
  }
  return child_index[static_cast<std::size_t>(frag.join)];
}

Fragment cut_fragment(const MolecularGraph& g, const std::vector<int>& cuttable, Rng& rng) {
  const int bond = cuttable[rng.index(cuttable.size())];
  const Bond& b = g.bonds[static_cast<std::size_t>(bond)];
  const int keep = rng.bernoulli(0.5) ? b.a : b.b;
  return Fragment{fragment_atoms(g, bond, keep), keep};
}

}  // namespace

// ---------------------------------------------------------------------------
// Observations.

void ObservedDataset::append(MolecularGraph mol, Fingerprint fp, double score) {
  const Hash128 h = canonical_hash(mol);
  if (!seen_.insert(h).second) {
    throw std::invalid_argument("molecule already observed");
  }
  entries_.push_back(ObservedEntry{std::move(mol), std::move(fp), score, h});
}

// ---------------------------------------------------------------------------
// Graph GA edit primitives.

std::optional<MolecularGraph> crossover(const MolecularGraph& p1, const MolecularGraph& p2,
                                        Rng& rng) {
  const std::vector<int> cut1 = cuttable_bonds(p1);
  const std::vector<int> cut2 = cuttable_bonds(p2);
  if (cut1.empty() || cut2.empty()) return std::nullopt;
  for (int attempt = 0; attempt < kCrossoverAttempts; ++attempt) {
    const Fragment f1 = cut_fragment(p1, cut1, rng);
    const Fragment f2 = cut_fragment(p2, cut2, rng);
    std::vector<Atom> atoms;
    std::vector<Bond> bonds;
    atoms.reserve(f1.atoms.size() + f2.atoms.size());
    const int join1 = append_fragment(p1, f1, atoms, bonds);
    const int join2 = append_fragment(p2, f2, atoms, bonds);
    bonds.push_back(Bond{join1, join2, BondOrder::Single, false});
    if (auto child = finalize_child(std::move(atoms), std::move(bonds))) return child;
  }
  return std::nullopt;
}

std::optional<MolecularGraph> mutate_with_kind(const MolecularGraph& g, MutationKind kind,
                                               Rng& rng) {
  switch (kind) {
    case MutationKind::ElementSwap: {
      const int target = static_cast<int>(rng.index(static_cast<std::size_t>(g.n_atoms())));
      const Elem current = g.atoms[static_cast<std::size_t>(target)].element;
      std::vector<Elem> options;
      for (const Elem e : kEditElements) {
        if (e != current) options.push_back(e);
      }
      std::vector<Atom> atoms = g.atoms;
      Atom& a = atoms[static_cast<std::size_t>(target)];
      a.element = options[rng.index(options.size())];
      // The new atom is written as a plain organic-subset atom.
      a.formal_charge = 0;
      a.explicit_h = 0;
      a.bracket = false;
      return finalize_child(std::move(atoms), g.bonds);
    }
    case MutationKind::BondOrderChange: {
      std::vector<int> editable;
      for (int i = 0; i < g.n_bonds(); ++i) {
        if (g.bonds[static_cast<std::size_t>(i)].order != BondOrder::Aromatic) {
          editable.push_back(i);
        }
      }
      if (editable.empty()) return std::nullopt;
      const int target = editable[rng.index(editable.size())];
      const BondOrder current = g.bonds[static_cast<std::size_t>(target)].order;
      std::vector<BondOrder> options;
      for (const BondOrder o : {BondOrder::Single, BondOrder::Double, BondOrder::Triple}) {
        if (o != current) options.push_back(o);
      }
      std::vector<Bond> bonds = g.bonds;
      bonds[static_cast<std::size_t>(target)].order = options[rng.index(options.size())];
      return finalize_child(g.atoms, std::move(bonds));
    }
    case MutationKind::AtomAppend: {
      const int attach = static_cast<int>(rng.index(static_cast<std::size_t>(g.n_atoms())));
      Atom fresh;
      fresh.element = kEditElements[rng.index(kEditElements.size())];
      std::vector<Atom> atoms = g.atoms;
      std::vector<Bond> bonds = g.bonds;
      bonds.push_back(Bond{attach, static_cast<int>(atoms.size()), BondOrder::Single, false});
      atoms.push_back(fresh);
      return finalize_child(std::move(atoms), std::move(bonds));
    }
    case MutationKind::AtomDelete: {
      if (g.n_atoms() <= 1) return std::nullopt;  // would leave an empty graph
      std::vector<int> terminal;
      for (int i = 0; i < g.n_atoms(); ++i) {
        if (g.degree(i) <= 1) terminal.push_back(i);
      }
      if (terminal.empty()) return std::nullopt;
      const int victim = terminal[rng.index(terminal.size())];
      std::vector<Atom> atoms;
      std::vector<int> child_index(static_cast<std::size_t>(g.n_atoms()), -1);
      for (int i = 0; i < g.n_atoms(); ++i) {
        if (i == victim) continue;
        child_index[static_cast<std::size_t>(i)] = static_cast<int>(atoms.size());
        atoms.push_back(g.atoms[static_cast<std::size_t>(i)]);
      }
      std::vector<Bond> bonds;
      for (const Bond& b : g.bonds) {
        if (b.a == victim || b.b == victim) continue;
        Bond copy = b;
        copy.a = child_index[static_cast<std::size_t>(b.a)];
        copy.b = child_index[static_cast<std::size_t>(b.b)];
        bonds.push_back(copy);
      }
      return finalize_child(std::move(atoms), std::move(bonds));
    }
  }
  return std::nullopt;
}

std::optional<MolecularGraph> mutate(const MolecularGraph& g, Rng& rng) {
  for (int attempt = 0; attempt < kMutateAttempts; ++attempt) {
    const auto kind = static_cast<MutationKind>(rng.index(4));
    if (auto child = mutate_with_kind(g, kind, rng)) return child;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Candidate generation.

std::vector<Candidate> generate_candidates(const ObservedDataset& obs, const RunConfig& cfg,
                                           std::uint64_t iter_seed, int target) {
  if (obs.size() < 2) {
    throw std::invalid_argument("candidate generation needs at least two observations");
  }
  const int want = target < 0 ? cfg.pool_size : target;
  if (want <= 0) return {};

  // Elite ranking: best score first, earlier observation on ties.
  const std::vector<ObservedEntry>& entries = obs.entries();
  std::vector<int> ranked(entries.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::sort(ranked.begin(), ranked.end(), [&entries](int a, int b) {
    const double sa = entries[static_cast<std::size_t>(a)].score;
    const double sb = entries[static_cast<std::size_t>(b)].score;
    if (sa != sb) return sa > sb;
    return a < b;
  });
  const int n_parents = std::min<int>(cfg.parents, static_cast<int>(ranked.size()));
  // Rank-proportional weights: the best parent gets weight n_parents, the
  // last elite gets weight 1.
  std::vector<double> cumulative(static_cast<std::size_t>(n_parents));
  double total = 0.0;
  for (int r = 0; r < n_parents; ++r) {
    total += static_cast<double>(n_parents - r);
    cumulative[static_cast<std::size_t>(r)] = total;
  }
  Rng rng(derive_seed(cfg.seed, kGenTag, iter_seed));
  const auto pick_parent = [&]() -> const ObservedEntry& {
    const double u = rng.uniform(0.0, total);
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t r = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
    return entries[static_cast<std::size_t>(ranked[r])];
  };

  std::vector<Candidate> batch;
  std::unordered_set<Hash128, Hash128Hasher> batch_hashes;
  const long max_attempts = static_cast<long>(want) * kAttemptsPerCandidate;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(batch.size()) < want;
       ++attempt) {
    const ObservedEntry& p1 = pick_parent();
    const ObservedEntry& p2 = pick_parent();
    std::optional<MolecularGraph> child = crossover(p1.mol, p2.mol, rng);
    if (!child) continue;
    if (rng.bernoulli(cfg.mutation_rate)) {
      child = mutate(*child, rng);
      if (!child) continue;
    }
    const Hash128 h = canonical_hash(*child);
    if (obs.contains(h) || batch_hashes.count(h) != 0) continue;
    batch_hashes.insert(h);
    Fingerprint fp = morgan_fingerprint(*child, cfg.fp_config);
    batch.push_back(Candidate{std::move(*child), std::move(fp), h, false});
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Acquisition and metrics.

double ucb(double mean, double std, double beta) { return mean + beta * std; }

double sample_beta(Rng& rng) { return std::pow(10.0, rng.uniform(-0.5, 1.5)); }

std::vector<int> select_top_ucb(const std::vector<double>& mean,
                                const std::vector<double>& std_dev, double beta, int k) {
  if (mean.size() != std_dev.size()) {
    throw std::invalid_argument("mean and std length mismatch");
  }
  if (k < 1 || static_cast<std::size_t>(k) > mean.size()) {
    throw std::invalid_argument("selection size out of range");
  }
  std::vector<double> score(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) score[i] = ucb(mean[i], std_dev[i], beta);
  std::vector<int> order(mean.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&score](int a, int b) {
    const double sa = score[static_cast<std::size_t>(a)];
    const double sb = score[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

namespace {

// Keeps the k largest values seen so far in descending order.
class RunningTopK {
 public:
  explicit RunningTopK(int k) : k_(static_cast<std::size_t>(k)) {}

  void push(double v) {
    const auto it = std::lower_bound(top_.begin(), top_.end(), v, std::greater<>());
    top_.insert(it, v);
    if (top_.size() > k_) top_.pop_back();
  }

  // Mean of the held values, summed from the largest down.
  double mean() const {
    const double sum = std::accumulate(top_.begin(), top_.end(), 0.0);
    return sum / static_cast<double>(top_.size());
  }

 private:
  std::size_t k_;
  std::vector<double> top_;
};

}  // namespace

double auc_topk(const std::vector<double>& trajectory, int k) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  if (k < 1) throw std::invalid_argument("k must be positive");
  RunningTopK top(k);
  double total = 0.0;
  for (const double y : trajectory) {
    top.push(y);
    total += top.mean();
  }
  return total / static_cast<double>(trajectory.size());
}

// ---------------------------------------------------------------------------
// The optimization loop.

std::string surrogate_kind(const Surrogate& s) {
  struct Visitor {
    std::string operator()(const RandomSurrogate&) const { return "random"; }
    std::string operator()(const GraphGaSurrogate&) const { return "graph_ga"; }
    std::string operator()(const GpSurrogate&) const { return "gp"; }
    std::string operator()(const IclSurrogate&) const { return "icl"; }
  };
  return std::visit(Visitor{}, s);
}

namespace {

struct ZScale {
  double mean = 0.0;
  double std = 1.0;
};

ZScale z_scale(const std::vector<double>& ys) {
  const double n = static_cast<double>(ys.size());
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double var = 0.0;
  for (const double y : ys) var += (y - mean) * (y - mean);
  const double std = std::sqrt(var / n);
  return ZScale{mean, std < 1e-12 ? 1.0 : std};
}

struct RunState {
  ObservedDataset obs;
  int undefined_evals = 0;
  int fallback_total = 0;
};

// Evaluates a batch (already deduplicated against the observations), records
// scores, and aborts on an undefined storm.  Undefined results score 0.
std::vector<double> evaluate_batch(const ObjectiveFn& objective,
                                   std::vector<Candidate> batch, RunState& state) {
  std::vector<EvalResult> results;
  results.reserve(batch.size());
  int undefined = 0;
  for (const Candidate& c : batch) {
    const EvalResult r = objective(c.mol);
    if (r.undefined) ++undefined;
    results.push_back(r);
  }
  if (2 * undefined > static_cast<int>(batch.size())) {
    throw UndefinedStorm("more than half of an evaluation batch was undefined");
  }
  state.undefined_evals += undefined;
  std::vector<double> scores;
  scores.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double y = results[i].undefined ? 0.0 : results[i].value;
    scores.push_back(y);
    state.obs.append(std::move(batch[i].mol), std::move(batch[i].fp), y);
    if (batch[i].fallback) ++state.fallback_total;
  }
  return scores;
}

// Uniformly picks `count` distinct pool molecules not yet observed.  Throws
// PoolExhausted when fewer than `count` remain.
std::vector<Candidate> draw_unseen_pool(const Pool& pool, const std::vector<Hash128>& hashes,
                                        const RunState& state,
                                        const std::unordered_set<Hash128, Hash128Hasher>& extra,
                                        int count, bool fallback, Rng& rng) {
  std::vector<int> unseen;
  for (int i = 0; i < static_cast<int>(pool.molecules.size()); ++i) {
    const Hash128& h = hashes[static_cast<std::size_t>(i)];
    if (!state.obs.contains(h) && extra.count(h) == 0) unseen.push_back(i);
  }
  if (static_cast<int>(unseen.size()) < count) {
    throw PoolExhausted("fewer unseen pool molecules than required");
  }
  // Partial Fisher-Yates: the first `count` entries become the sample.
  for (int i = 0; i < count; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) + rng.index(unseen.size() - static_cast<std::size_t>(i));
    std::swap(unseen[static_cast<std::size_t>(i)], unseen[j]);
  }
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::size_t p = static_cast<std::size_t>(unseen[static_cast<std::size_t>(i)]);
    out.push_back(Candidate{pool.molecules[p], pool.fingerprints[p], hashes[p], fallback});
  }
  return out;
}

void validate_config(const RunConfig& cfg, const Surrogate& surrogate, const Pool& pool) {
  if (cfg.budget < 1 || cfg.batch_k < 1 || cfg.pool_size < 1 || cfg.init_size < 1 ||
      cfg.parents < 1) {
    throw std::invalid_argument("all run counts must be positive");
  }
  if (cfg.init_size > cfg.budget) {
    throw std::invalid_argument("initial population exceeds the budget");
  }
  if (cfg.batch_k > cfg.pool_size) {
    throw std::invalid_argument("batch size exceeds the candidate pool size");
  }
  if (!(cfg.mutation_rate >= 0.0 && cfg.mutation_rate <= 1.0)) {
    throw std::invalid_argument("mutation rate must lie in [0, 1]");
  }
  if (pool.molecules.empty()) {
    throw std::invalid_argument("empty molecule pool");
  }
  if (pool.fingerprints.size() != pool.molecules.size()) {
    throw std::invalid_argument("pool fingerprints out of sync with molecules");
  }
  if (pool.fingerprints.front().nbits != cfg.fp_config.nbits) {
    throw std::invalid_argument("pool fingerprint width differs from the run configuration");
  }
  if (const auto* icl = std::get_if<IclSurrogate>(&surrogate)) {
    if (icl->model == nullptr) {
      throw std::invalid_argument("in-context surrogate requires a model");
    }
    if (icl->model->config().x_dim != cfg.fp_config.nbits) {
      throw std::invalid_argument("model input width differs from the fingerprint width");
    }
    if (icl->model->config().max_pairs < 2) {
      throw std::invalid_argument("model sequence capacity leaves no room for context");
    }
  }
}

}  // namespace

RunResult run_optimization(const ObjectiveFn& objective, const Surrogate& surrogate,
                           const Pool& pool, const RunConfig& cfg) {
  validate_config(cfg, surrogate, pool);
  const int pool_n = static_cast<int>(pool.molecules.size());
  if (cfg.init_size > pool_n) {
    throw PoolExhausted("initial population larger than the molecule pool");
  }

  std::vector<Hash128> pool_hashes;
  pool_hashes.reserve(pool.molecules.size());
  for (const MolecularGraph& g : pool.molecules) pool_hashes.push_back(canonical_hash(g));

  Rng rng(derive_seed(cfg.seed, kRunTag));
  RunState state;
  RunResult result;
  const std::unordered_set<Hash128, Hash128Hasher> no_extra;

  // Initial population: distinct random pool molecules.
  {
    std::vector<Candidate> init =
        draw_unseen_pool(pool, pool_hashes, state, no_extra, cfg.init_size, false, rng);
    evaluate_batch(objective, std::move(init), state);
  }

  // GP hyperparameters are fit once, on the standardized initial population.
  GpHyperparams gp_hyper;
  if (std::holds_alternative<GpSurrogate>(surrogate)) {
    std::vector<Fingerprint> xs;
    std::vector<double> ys;
    for (const ObservedEntry& e : state.obs.entries()) {
      xs.push_back(e.fp);
      ys.push_back(e.score);
    }
    const ZScale scale = z_scale(ys);
    for (double& y : ys) y = (y - scale.mean) / scale.std;
    try {
      gp_hyper = TanimotoGP::fit_mle(xs, ys);
    } catch (const DegenerateData&) {
      gp_hyper = GpHyperparams{1.0, 1e-2};  // flat data: fall back to a broad prior
    }
  }

  int iteration = 0;
  while (state.obs.size() < cfg.budget) {
    const int bk = std::min(cfg.batch_k, cfg.budget - state.obs.size());
    const std::uint64_t iter_seed = rng.next_u64();
    IterationLog log;
    log.iteration = iteration;

    if (std::holds_alternative<RandomSurrogate>(surrogate)) {
      std::vector<Candidate> batch =
          draw_unseen_pool(pool, pool_hashes, state, no_extra, bk, false, rng);
      log.n_candidates = static_cast<int>(batch.size());
      log.scores = evaluate_batch(objective, std::move(batch), state);
    } else if (std::holds_alternative<GraphGaSurrogate>(surrogate)) {
      std::vector<Candidate> batch = generate_candidates(state.obs, cfg, iter_seed, bk);
      if (static_cast<int>(batch.size()) < bk) {
        std::unordered_set<Hash128, Hash128Hasher> batch_hashes;
        for (const Candidate& c : batch) batch_hashes.insert(c.hash);
        std::vector<Candidate> filler =
            draw_unseen_pool(pool, pool_hashes, state, batch_hashes,
                             bk - static_cast<int>(batch.size()), true, rng);
        for (Candidate& c : filler) batch.push_back(std::move(c));
      }
      log.n_candidates = static_cast<int>(batch.size());
      log.n_fallback = static_cast<int>(
          std::count_if(batch.begin(), batch.end(), [](const Candidate& c) { return c.fallback; }));
      log.scores = evaluate_batch(objective, std::move(batch), state);
    } else {
      // Model-guided: breed a large candidate pool, predict, take the UCB top k.
      std::vector<Candidate> cands = generate_candidates(state.obs, cfg, iter_seed);
      if (static_cast<int>(cands.size()) < bk) {
        std::unordered_set<Hash128, Hash128Hasher> cand_hashes;
        for (const Candidate& c : cands) cand_hashes.insert(c.hash);
        std::vector<Candidate> filler =
            draw_unseen_pool(pool, pool_hashes, state, cand_hashes,
                             bk - static_cast<int>(cands.size()), true, rng);
        for (Candidate& c : filler) cands.push_back(std::move(c));
      }
      log.n_candidates = static_cast<int>(cands.size());
      log.n_fallback = static_cast<int>(
          std::count_if(cands.begin(), cands.end(), [](const Candidate& c) { return c.fallback; }));

      // Standardize the observed scores; predictions come back in z-space.
      std::vector<double> ys;
      for (const ObservedEntry& e : state.obs.entries()) ys.push_back(e.score);
      const ZScale scale = z_scale(ys);
      std::vector<double> z(ys.size());
      for (std::size_t i = 0; i < ys.size(); ++i) z[i] = (ys[i] - scale.mean) / scale.std;

      std::vector<Fingerprint> cand_fps;
      cand_fps.reserve(cands.size());
      for (const Candidate& c : cands) cand_fps.push_back(c.fp);

      std::vector<double> mu_z;
      std::vector<double> sd_z;
      if (std::holds_alternative<GpSurrogate>(surrogate)) {
        std::vector<Fingerprint> xs;
        for (const ObservedEntry& e : state.obs.entries()) xs.push_back(e.fp);
        const TanimotoGP gp(std::move(xs), z, gp_hyper);
        GpPrediction pred = gp.predict(cand_fps);
        mu_z = std::move(pred.mean);
        sd_z = std::move(pred.std);
      } else {
        const IclSurrogate& icl = std::get<IclSurrogate>(surrogate);
        // One sequence slot is reserved for the query pair, so at most
        // max_pairs - 1 observations fit in the context window.
        const int max_ctx = icl.model->config().max_pairs - 1;
        // Context window: the most recent observations, oldest first.
        const std::size_t n = z.size();
        const std::size_t window = std::min<std::size_t>(n, static_cast<std::size_t>(max_ctx));
        const std::size_t start = n - window;
        std::vector<std::size_t> order(window);
        std::iota(order.begin(), order.end(), start);
        if (cfg.sort_context) {
          std::stable_sort(order.begin(), order.end(),
                           [&z](std::size_t a, std::size_t b) { return z[a] < z[b]; });
        }
        std::vector<Fingerprint> ctx_x;
        std::vector<double> ctx_y;
        ctx_x.reserve(window);
        ctx_y.reserve(window);
        for (const std::size_t i : order) {
          ctx_x.push_back(state.obs.entries()[i].fp);
          ctx_y.push_back(z[i]);
        }
        const std::vector<Prediction> preds =
            predict_incontext(*icl.model, ctx_x, ctx_y, cand_fps);
        mu_z.reserve(preds.size());
        sd_z.reserve(preds.size());
        for (const Prediction& p : preds) {
          mu_z.push_back(p.mean);
          sd_z.push_back(p.std);
        }
      }

      log.pred_mean.resize(mu_z.size());
      log.pred_std.resize(sd_z.size());
      for (std::size_t i = 0; i < mu_z.size(); ++i) {
        log.pred_mean[i] = scale.mean + scale.std * mu_z[i];
        log.pred_std[i] = scale.std * sd_z[i];
      }

      log.beta = std::holds_alternative<SampledBeta>(cfg.beta_mode)
                     ? sample_beta(rng)
                     : std::get<FixedBeta>(cfg.beta_mode).beta;
      log.selected = select_top_ucb(log.pred_mean, log.pred_std, log.beta, bk);
      std::vector<Candidate> batch;
      batch.reserve(log.selected.size());
      for (const int idx : log.selected) {
        batch.push_back(std::move(cands[static_cast<std::size_t>(idx)]));
      }
      log.scores = evaluate_batch(objective, std::move(batch), state);
    }

    result.iterations.push_back(std::move(log));
    ++iteration;
  }

  // Metrics over the full evaluation-order trajectory.
  result.trajectory.reserve(state.obs.entries().size());
  for (const ObservedEntry& e : state.obs.entries()) result.trajectory.push_back(e.score);
  result.auc_top1 = auc_topk(result.trajectory, 1);
  result.auc_top10 = auc_topk(result.trajectory, 10);
  result.auc_top100 = auc_topk(result.trajectory, 100);
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.trajectory.size(); ++i) {
    if (result.trajectory[i] > result.trajectory[best]) best = i;
  }
  result.best_score = result.trajectory[best];
  result.best_smiles = write_smiles(state.obs.entries()[best].mol);
  result.undefined_evals = state.undefined_evals;
  result.fallback_total = state.fallback_total;
  return result;
}

// ---------------------------------------------------------------------------
// Serialization.

std::string to_json(const RunResult& r) {
  nlohmann::json j;
  j["trajectory"] = r.trajectory;
  j["auc_top1"] = r.auc_top1;
  j["auc_top10"] = r.auc_top10;
  j["auc_top100"] = r.auc_top100;
  j["best_score"] = r.best_score;
  j["best_smiles"] = r.best_smiles;
  j["undefined_evals"] = r.undefined_evals;
  j["fallback_total"] = r.fallback_total;
  nlohmann::json iters = nlohmann::json::array();
  for (const IterationLog& log : r.iterations) {
    nlohmann::json item;
    item["iteration"] = log.iteration;
    item["beta"] = log.beta;
    item["n_candidates"] = log.n_candidates;
    item["n_fallback"] = log.n_fallback;
    item["pred_mean"] = log.pred_mean;
    item["pred_std"] = log.pred_std;
    item["selected"] = log.selected;
    item["scores"] = log.scores;
    iters.push_back(std::move(item));
  }
  j["iterations"] = std::move(iters);
  return j.dump(2);
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string trajectory_csv(const RunResult& r) {
  std::string out = "call,score,top1,top10,top100\n";
  RunningTopK top1(1);
  RunningTopK top10(10);
  RunningTopK top100(100);
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const double y = r.trajectory[i];
    top1.push(y);
    top10.push(y);
    top100.push(y);
    out += std::to_string(i + 1);
    out += ',';
    out += format_double(y);
    out += ',';
    out += format_double(top1.mean());
    out += ',';
    out += format_double(top10.mean());
    out += ',';
    out += format_double(top100.mean());
    out += '\n';
  }
  return out;
}

}  // namespace molbbo
