#include "molbbo/bench.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "molbbo/icl.hpp"
#include "molbbo/objectives.hpp"
#include "molbbo/rng.hpp"

namespace molbbo {
namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_name(const std::string& name, const char* what) {
  if (name.empty()) {
    throw std::invalid_argument(std::string(what) + " name must not be empty");
  }
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) != 0 ||
                    c == '_' || c == '.' || c == '-';
    if (!ok) {
      throw std::invalid_argument(std::string(what) + " name '" + name +
                                  "' may only use characters [A-Za-z0-9_.-]");
    }
  }
}

BenchmarkConfig parse_checked(const json& j) {
  BenchmarkConfig cfg;

  if (!j.is_object()) throw std::invalid_argument("sweep config must be a JSON object");
  if (!j.contains("objectives") || !j.at("objectives").is_array() ||
      j.at("objectives").empty()) {
    throw std::invalid_argument("sweep config needs a non-empty \"objectives\" array");
  }
  if (!j.contains("methods") || !j.at("methods").is_array() ||
      j.at("methods").empty()) {
    throw std::invalid_argument("sweep config needs a non-empty \"methods\" array");
  }

  std::set<std::string> seen_objectives;
  int index = 0;
  for (const json& o : j.at("objectives")) {
    if (!o.is_object()) {
      throw std::invalid_argument("objective entries must be JSON objects");
    }
    ObjectiveSpec spec;
    spec.name = o.value("name", "obj" + std::to_string(index));
    spec.json = o.dump();
    check_name(spec.name, "objective");
    if (!seen_objectives.insert(spec.name).second) {
      throw std::invalid_argument("duplicate objective name '" + spec.name + "'");
    }
    cfg.objectives.push_back(std::move(spec));
    ++index;
  }

  const std::set<std::string> known_kinds = {"random", "graph_ga", "gp", "icl"};
  std::set<std::string> seen_methods;
  for (const json& m : j.at("methods")) {
    MethodSpec spec;
    if (m.is_string()) {
      spec.kind = m.get<std::string>();
      spec.name = spec.kind;
    } else if (m.is_object()) {
      spec.kind = m.at("kind").get<std::string>();
      spec.checkpoint = m.value("checkpoint", "");
      spec.name = m.value("name", spec.kind);
    } else {
      throw std::invalid_argument("method entries must be strings or objects");
    }
    if (spec.kind == "graph-ga") spec.kind = "graph_ga";
    if (spec.name == "graph-ga") spec.name = "graph_ga";
    if (known_kinds.count(spec.kind) == 0) {
      throw std::invalid_argument("unknown method kind '" + spec.kind + "'");
    }
    if (spec.kind == "icl" && spec.checkpoint.empty()) {
      throw std::invalid_argument("icl methods need a \"checkpoint\" path");
    }
    check_name(spec.name, "method");
    if (!seen_methods.insert(spec.name).second) {
      throw std::invalid_argument("duplicate method name '" + spec.name + "'");
    }
    cfg.methods.push_back(std::move(spec));
  }

  if (j.contains("seeds")) {
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) {
      throw std::invalid_argument("\"seeds\" must not be empty");
    }
  } else if (j.contains("n_seeds")) {
    const int n = j.at("n_seeds").get<int>();
    if (n < 1) throw std::invalid_argument("\"n_seeds\" must be at least 1");
    for (int s = 0; s < n; ++s) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    cfg.seeds = {0, 1, 2, 3, 4};
  }

  if (j.contains("run")) {
    const json& r = j.at("run");
    RunConfig& rc = cfg.run;
    rc.budget = r.value("budget", rc.budget);
    rc.batch_k = r.value("batch_k", rc.batch_k);
    rc.pool_size = r.value("pool_size", rc.pool_size);
    rc.init_size = r.value("init_size", rc.init_size);
    rc.parents = r.value("parents", rc.parents);
    rc.mutation_rate = r.value("mutation_rate", rc.mutation_rate);
    rc.sort_context = r.value("sort_context", rc.sort_context);
    if (r.contains("beta")) {
      rc.beta_mode = FixedBeta{r.at("beta").get<double>()};
    }
    if (r.contains("fingerprint")) {
      const json& f = r.at("fingerprint");
      rc.fp_config.radius = f.value("radius", rc.fp_config.radius);
      rc.fp_config.nbits = f.value("nbits", rc.fp_config.nbits);
    }
  }

  cfg.pool = j.value("pool", std::string());
  cfg.output_dir = j.value("output_dir", std::string());
  cfg.seed = j.value("seed", std::uint64_t{0});
  return cfg;
}

// triples flatten objective-major, then method, then seed entry
struct TripleIndex {
  int objective = 0;
  int method = 0;
  int seed = 0;
};

TripleIndex unflatten(int t, int n_methods, int n_seeds) {
  TripleIndex ix;
  ix.objective = t / (n_methods * n_seeds);
  ix.method = (t / n_seeds) % n_methods;
  ix.seed = t % n_seeds;
  return ix;
}

void check_result_shape(const BenchmarkConfig& cfg,
                        const std::vector<RunResult>& results) {
  const std::size_t want =
      cfg.objectives.size() * cfg.methods.size() * cfg.seeds.size();
  if (results.size() != want) {
    throw std::invalid_argument("result count does not match the sweep shape");
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

BenchmarkConfig parse_benchmark_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("sweep config is not valid JSON: ") +
                                e.what());
  }
  try {
    return parse_checked(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("sweep config: ") + e.what());
  }
}

std::vector<RunResult> run_sweep(const Pool& pool, const BenchmarkConfig& cfg) {
  if (cfg.objectives.empty() || cfg.methods.empty() || cfg.seeds.empty()) {
    throw std::invalid_argument("sweep needs objectives, methods, and seeds");
  }

  // load every distinct checkpoint once, before any run starts
  std::map<std::string, Parameters> models;
  for (const MethodSpec& m : cfg.methods) {
    if (m.kind == "icl" && models.find(m.checkpoint) == models.end()) {
      models.try_emplace(m.checkpoint, load_checkpoint(m.checkpoint));
    }
  }
  std::vector<Surrogate> surrogates;
  for (const MethodSpec& m : cfg.methods) {
    if (m.kind == "random") {
      surrogates.emplace_back(RandomSurrogate{});
    } else if (m.kind == "graph_ga") {
      surrogates.emplace_back(GraphGaSurrogate{});
    } else if (m.kind == "gp") {
      surrogates.emplace_back(GpSurrogate{});
    } else if (m.kind == "icl") {
      surrogates.emplace_back(IclSurrogate{&models.at(m.checkpoint)});
    } else {
      throw std::invalid_argument("unknown method kind '" + m.kind + "'");
    }
  }

  const int n_methods = static_cast<int>(cfg.methods.size());
  const int n_seeds = static_cast<int>(cfg.seeds.size());
  const int total = static_cast<int>(cfg.objectives.size()) * n_methods * n_seeds;
  std::vector<RunResult> results(static_cast<std::size_t>(total));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < total; ++t) {
    const TripleIndex ix = unflatten(t, n_methods, n_seeds);
    try {
      const Objective objective =
          load_objective(cfg.objectives[ix.objective].json, &pool);
      RunConfig rc = cfg.run;
      rc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(ix.objective),
                            static_cast<std::uint64_t>(ix.method),
                            cfg.seeds[ix.seed]);
      const ObjectiveFn fn = [&objective](const MolecularGraph& g) {
        return evaluate(objective, g);
      };
      results[t] = run_optimization(fn, surrogates[ix.method], pool, rc);
    } catch (...) {
      failures[t] = std::current_exception();
    }
  }

  for (int t = 0; t < total; ++t) {
    if (failures[t]) std::rethrow_exception(failures[t]);
  }
  return results;
}

std::vector<double> mean_ranks(const std::vector<std::vector<double>>& scores) {
  if (scores.empty() || scores.front().empty()) {
    throw std::invalid_argument("mean_ranks needs a non-empty score table");
  }
  const std::size_t n_methods = scores.front().size();
  std::vector<double> sum(n_methods, 0.0);
  for (const std::vector<double>& row : scores) {
    if (row.size() != n_methods) {
      throw std::invalid_argument("mean_ranks needs a rectangular score table");
    }
    for (std::size_t j = 0; j < n_methods; ++j) {
      double rank = 1.0;
      for (std::size_t i = 0; i < n_methods; ++i) {
        if (i == j) continue;
        if (row[i] > row[j]) rank += 1.0;
        if (row[i] == row[j]) rank += 0.5;
      }
      sum[j] += rank;
    }
  }
  for (double& s : sum) s /= static_cast<double>(scores.size());
  return sum;
}

std::vector<std::vector<double>> mean_auc10_table(
    const BenchmarkConfig& cfg, const std::vector<RunResult>& results) {
  check_result_shape(cfg, results);
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::vector<double>> table(
      cfg.objectives.size(), std::vector<double>(n_methods, 0.0));
  for (std::size_t o = 0; o < cfg.objectives.size(); ++o) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      double s = 0.0;
      for (std::size_t k = 0; k < n_seeds; ++k) {
        s += results[(o * n_methods + m) * n_seeds + k].auc_top10;
      }
      table[o][m] = s / static_cast<double>(n_seeds);
    }
  }
  return table;
}

std::string aggregate_csv(const BenchmarkConfig& cfg,
                          const std::vector<RunResult>& results) {
  check_result_shape(cfg, results);
  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_seeds = cfg.seeds.size();
  std::string out =
      "objective,method,n_seeds,auc_top1_mean,auc_top1_std,auc_top10_mean,"
      "auc_top10_std,auc_top100_mean,auc_top100_std,best_mean\n";
  for (std::size_t o = 0; o < cfg.objectives.size(); ++o) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      std::vector<double> auc1, auc10, auc100, best;
      for (std::size_t k = 0; k < n_seeds; ++k) {
        const RunResult& r = results[(o * n_methods + m) * n_seeds + k];
        auc1.push_back(r.auc_top1);
        auc10.push_back(r.auc_top10);
        auc100.push_back(r.auc_top100);
        best.push_back(r.best_score);
      }
      out += cfg.objectives[o].name + "," + cfg.methods[m].name + "," +
             std::to_string(n_seeds) + "," + fmt17(mean_of(auc1)) + "," +
             fmt17(pop_std_of(auc1)) + "," + fmt17(mean_of(auc10)) + "," +
             fmt17(pop_std_of(auc10)) + "," + fmt17(mean_of(auc100)) + "," +
             fmt17(pop_std_of(auc100)) + "," + fmt17(mean_of(best)) + "\n";
    }
  }
  return out;
}

std::string rank_csv(const BenchmarkConfig& cfg,
                     const std::vector<RunResult>& results) {
  const std::vector<double> ranks = mean_ranks(mean_auc10_table(cfg, results));
  std::string out = "method,mean_rank\n";
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    out += cfg.methods[m].name + "," + fmt17(ranks[m]) + "\n";
  }
  return out;
}

}  // namespace molbbo
