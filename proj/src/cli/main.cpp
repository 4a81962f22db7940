// molbbo command-line tool.
//
// Subcommands:
//   ingest          parse a SMILES corpus into a binary pool cache
//   train           train the in-context surrogate on a pool cache
//   eval-surrogate  score a trained surrogate (and a GP baseline) on
//                   held-out functions across context lengths
//   optimize        run a benchmark sweep (objectives x methods x seeds)
//   descriptors     print the descriptor vector of one SMILES (debug aid)
//
// Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
// malformed inputs and configs), 3 runtime failure.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "molbbo/bench.hpp"
#include "molbbo/datagen.hpp"
#include "molbbo/descriptors.hpp"
#include "molbbo/evaluate.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/gp.hpp"
#include "molbbo/icl.hpp"
#include "molbbo/molgraph.hpp"
#include "molbbo/objectives.hpp"
#include "molbbo/optimize.hpp"
#include "molbbo/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace molbbo;

namespace {

// seed-domain tags for the training command
constexpr std::uint64_t kParamInitTag = 0x434c49494e4954ull;  // param init
constexpr std::uint64_t kStreamTag = 0x434c4953545245ull;     // batch stream

// An error with a pinned process exit code.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

struct Flags {
  std::string input;    // ingest corpus
  std::string smiles;   // descriptors argument
  std::string config;   // JSON config file
  std::string out;      // primary output path
  std::string pool;     // pool cache path
  std::string checkpoint;
  std::string loss_out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;  // 0 keeps the library default
  int steps = -1;
  int batch_size = -1;
  int stop_after = -1;
  bool resume = false;
};

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json load_json_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(2, "cannot open config " + path);
  const std::string text{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw CliError(2, "config " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw CliError(2, "config " + path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(2, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw CliError(3, "cannot write " + path.string());
}

FingerprintConfig fp_from(const json& cfg) {
  FingerprintConfig fp;
  if (cfg.contains("fingerprint")) {
    const json& f = cfg.at("fingerprint");
    fp.radius = f.value("radius", fp.radius);
    fp.nbits = f.value("nbits", fp.nbits);
  }
  return fp;
}

Pool load_cache_checked(const std::string& path, const FingerprintConfig& fp) {
  try {
    return load_pool_cache(path, fp);
  } catch (const std::runtime_error& e) {
    throw CliError(2, e.what());
  }
}

void apply_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Flags& f) {
  const json cfg = load_json_config(f.config);
  const FingerprintConfig fp = fp_from(cfg);
  Pool pool;
  try {
    pool = load_pool(f.input, fp);
  } catch (const std::runtime_error& e) {
    throw CliError(2, e.what());
  }
  try {
    save_pool_cache(pool, f.out);
  } catch (const std::runtime_error& e) {
    throw CliError(3, e.what());
  }

  std::printf("molecules %lld\n", static_cast<long long>(pool.size()));
  std::printf("skipped %d\n", pool.skipped_lines);
  std::printf("duplicates %d\n", pool.dropped_duplicates);
  std::printf("fingerprint radius %d nbits %d\n", fp.radius, fp.nbits);
  for (int d = 0; d < kNumDescriptors; ++d) {
    int defined = 0;
    for (const std::vector<double>& row : pool.descriptor_table) {
      if (!is_undefined(row[static_cast<std::size_t>(d)])) ++defined;
    }
    const std::string name(descriptor_name(static_cast<DescriptorId>(d)));
    std::printf("coverage %s %d/%lld\n", name.c_str(), defined,
                static_cast<long long>(pool.size()));
  }
  std::printf("cache %s\n", f.out.c_str());
  return 0;
}

int cmd_descriptors(const Flags& f) {
  const MolecularGraph g = parse_smiles(f.smiles);
  const std::vector<double> values = compute_all(g);
  for (int d = 0; d < kNumDescriptors; ++d) {
    const std::string name(descriptor_name(static_cast<DescriptorId>(d)));
    if (is_undefined(values[static_cast<std::size_t>(d)])) {
      std::printf("%s undefined\n", name.c_str());
    } else {
      std::printf("%s %s\n", name.c_str(),
                  fmt17(values[static_cast<std::size_t>(d)]).c_str());
    }
  }
  return 0;
}

int cmd_train(const Flags& f) {
  const json cfg = load_json_config(f.config);

  ModelConfig model;
  if (cfg.contains("model")) {
    const json& m = cfg.at("model");
    model.d_model = m.value("d_model", model.d_model);
    model.n_layers = m.value("n_layers", model.n_layers);
    model.n_heads = m.value("n_heads", model.n_heads);
    model.x_dim = m.value("x_dim", model.x_dim);
    model.embed_hidden = m.value("embed_hidden", model.embed_hidden);
    model.max_pairs = m.value("max_pairs", model.max_pairs);
    model.logstd_min = m.value("logstd_min", model.logstd_min);
    model.logstd_max = m.value("logstd_max", model.logstd_max);
  }

  TrainSchedule schedule;
  schedule.steps = 3000;  // desk-scale default; batch 8 and lr come from the struct
  if (cfg.contains("schedule")) {
    const json& s = cfg.at("schedule");
    schedule.steps = s.value("steps", schedule.steps);
    schedule.batch_size = s.value("batch_size", schedule.batch_size);
    schedule.base_lr = s.value("base_lr", schedule.base_lr);
    schedule.warmup_steps = s.value("warmup_steps", schedule.warmup_steps);
    schedule.clip_norm = s.value("clip_norm", schedule.clip_norm);
  }

  SamplerConfig sampler;
  if (cfg.contains("sampler")) {
    const json& s = cfg.at("sampler");
    sampler.synthetic_ratio = s.value("synthetic_ratio", sampler.synthetic_ratio);
    sampler.n_min = s.value("n_min", sampler.n_min);
    sampler.n_max = s.value("n_max", sampler.n_max);
  }

  const std::uint64_t seed =
      f.seed_set ? f.seed : cfg.value("seed", std::uint64_t{0});
  if (f.steps >= 0) schedule.steps = f.steps;
  if (f.batch_size >= 0) schedule.batch_size = f.batch_size;

  const FingerprintConfig fp = fp_from(cfg);
  const Pool pool = load_cache_checked(f.pool, fp);
  if (!pool.fingerprints.empty() &&
      pool.fingerprints.front().nbits != model.x_dim) {
    throw CliError(2, "model x_dim " + std::to_string(model.x_dim) +
                          " does not match the pool fingerprint width " +
                          std::to_string(pool.fingerprints.front().nbits));
  }
  if (sampler.n_max > model.max_pairs) {
    throw CliError(2, "sampler n_max " + std::to_string(sampler.n_max) +
                          " exceeds the model's max_pairs " +
                          std::to_string(model.max_pairs));
  }
  sampler.seed = seed;

  Parameters params(model);
  AdamState adam;
  std::int64_t start = 0;
  if (f.resume) {
    params = load_checkpoint(f.out, &adam, &model);
    start = adam.step;
    std::printf("resumed from step %lld\n", static_cast<long long>(start));
  } else {
    params.random_init(derive_seed(seed, kParamInitTag));
  }

  const DescriptorRegistry& registry = DescriptorRegistry::instance();
  const int batch_size = schedule.batch_size;
  const BatchStream stream = [&pool, &registry, sampler, batch_size,
                              seed](int step) {
    SequenceBatch batch;
    for (int i = 0; i < batch_size; ++i) {
      TrainingSequence seq = sample_sequence(
          pool, registry, sampler,
          derive_seed(seed, kStreamTag, static_cast<std::uint64_t>(step),
                      static_cast<std::uint64_t>(i)));
      batch.items.push_back(SequenceItem{std::move(seq.xs), std::move(seq.ys)});
    }
    return batch;
  };

  const TrainResult result = train(params, stream, schedule, &adam, f.stop_after);
  try {
    save_checkpoint(params, f.out, &adam);
  } catch (const std::runtime_error& e) {
    throw CliError(3, e.what());
  }

  const std::string loss_path =
      f.loss_out.empty() ? f.out + ".loss.csv" : f.loss_out;
  const bool append = f.resume && fs::exists(loss_path);
  std::ofstream csv(loss_path,
                    std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!csv) throw CliError(3, "cannot write " + loss_path);
  if (!append) csv << "step,nll\n";
  for (std::size_t i = 0; i < result.loss_trace.size(); ++i) {
    csv << (start + static_cast<std::int64_t>(i)) << ','
        << fmt17(result.loss_trace[i]) << '\n';
  }
  csv.flush();
  if (!csv) throw CliError(3, "cannot write " + loss_path);

  if (result.loss_trace.empty()) {
    std::printf("no steps to run\n");
  } else {
    std::printf("trained steps %lld..%lld\n", static_cast<long long>(start),
                static_cast<long long>(adam.step));
    const std::size_t window = std::min<std::size_t>(100, result.loss_trace.size());
    double first = 0.0;
    double last = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      first += result.loss_trace[i];
      last += result.loss_trace[result.loss_trace.size() - window + i];
    }
    std::printf("mean nll first %s last %s\n",
                fmt17(first / static_cast<double>(window)).c_str(),
                fmt17(last / static_cast<double>(window)).c_str());
  }
  std::printf("checkpoint %s\n", f.out.c_str());
  std::printf("loss csv %s\n", loss_path.c_str());
  return 0;
}

int cmd_eval_surrogate(const Flags& f) {
  const json cfg = load_json_config(f.config);
  EvalSetConfig ecfg;
  ecfg.n_functions = cfg.value("n_functions", ecfg.n_functions);
  ecfg.n_context = cfg.value("n_context", ecfg.n_context);
  ecfg.n_target = cfg.value("n_target", ecfg.n_target);
  ecfg.synthetic_ratio = cfg.value("synthetic_ratio", ecfg.synthetic_ratio);
  ecfg.seed = f.seed_set ? f.seed : cfg.value("seed", std::uint64_t{0});
  const std::vector<int> contexts =
      cfg.value("contexts", std::vector<int>{8, 32, 128});
  if (contexts.empty()) throw CliError(2, "\"contexts\" must not be empty");

  const FingerprintConfig fp = fp_from(cfg);
  const Pool pool = load_cache_checked(f.pool, fp);
  const Parameters params = load_checkpoint(f.checkpoint);
  if (params.config().x_dim != fp.nbits) {
    throw CliError(2, "checkpoint x_dim " +
                          std::to_string(params.config().x_dim) +
                          " does not match the fingerprint width " +
                          std::to_string(fp.nbits));
  }

  const std::vector<EvalFunction> functions =
      build_eval_functions(pool, DescriptorRegistry::instance(), ecfg);
  const std::vector<MetricRow> icl_rows =
      evaluate_surrogate(functions, contexts, icl_predictor(params));
  const std::vector<MetricRow> gp_rows =
      evaluate_surrogate(functions, contexts, gp_predictor());

  write_text_file(f.out, metric_rows_csv({{"icl", icl_rows}, {"gp", gp_rows}}));

  for (const auto& [method, rows] :
       std::vector<std::pair<std::string, const std::vector<MetricRow>*>>{
           {"icl", &icl_rows}, {"gp", &gp_rows}}) {
    for (int c : contexts) {
      std::printf("method %s context %d mean_nll %s mean_mse %s\n",
                  method.c_str(), c, fmt17(mean_nll(*rows, c)).c_str(),
                  fmt17(mean_mse(*rows, c)).c_str());
    }
  }
  std::printf("csv %s\n", f.out.c_str());
  return 0;
}

int cmd_optimize(const Flags& f) {
  BenchmarkConfig cfg = parse_benchmark_config(read_text_file(f.config));
  if (f.seed_set) cfg.seed = f.seed;
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (!f.pool.empty()) cfg.pool = f.pool;
  if (cfg.pool.empty()) {
    throw CliError(2, "no pool cache: set config key \"pool\" or pass --pool");
  }
  if (cfg.output_dir.empty()) {
    throw CliError(2, "no output directory: set \"output_dir\" or pass --out");
  }

  const Pool pool = load_cache_checked(cfg.pool, cfg.run.fp_config);
  const std::vector<RunResult> results = run_sweep(pool, cfg);

  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir / "runs", ec);
  if (ec) throw CliError(3, "cannot create " + (dir / "runs").string());

  const std::size_t n_methods = cfg.methods.size();
  const std::size_t n_seeds = cfg.seeds.size();
  for (std::size_t o = 0; o < cfg.objectives.size(); ++o) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const fs::path file =
            dir / "runs" /
            (cfg.objectives[o].name + "_" + cfg.methods[m].name + "_seed" +
             std::to_string(cfg.seeds[s]) + ".json");
        write_text_file(file, to_json(results[(o * n_methods + m) * n_seeds + s]));
      }
    }
  }
  write_text_file(dir / "aggregate.csv", aggregate_csv(cfg, results));
  write_text_file(dir / "ranks.csv", rank_csv(cfg, results));

  for (std::size_t o = 0; o < cfg.objectives.size(); ++o) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      double mean = 0.0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        mean += results[(o * n_methods + m) * n_seeds + s].auc_top10;
      }
      mean /= static_cast<double>(n_seeds);
      double var = 0.0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const double d =
            results[(o * n_methods + m) * n_seeds + s].auc_top10 - mean;
        var += d * d;
      }
      const double sd = std::sqrt(var / static_cast<double>(n_seeds));
      std::printf("objective %s method %s auc10 %s +/- %s\n",
                  cfg.objectives[o].name.c_str(), cfg.methods[m].name.c_str(),
                  fmt17(mean).c_str(), fmt17(sd).c_str());
    }
  }
  const std::vector<double> ranks = mean_ranks(mean_auc10_table(cfg, results));
  for (std::size_t m = 0; m < n_methods; ++m) {
    std::printf("rank %s %s\n", cfg.methods[m].name.c_str(),
                fmt17(ranks[m]).c_str());
  }
  std::printf("outputs %s\n", cfg.output_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

template <typename F>
int guard(F&& body) {
  try {
    return body();
  } catch (const CliError& e) {
    std::cerr << e.what() << "\n";
    return e.code();
  } catch (const molbbo::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const EmptyPool& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const WidthMismatch& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const VersionMismatch& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const PoolExhausted& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const UndefinedStorm& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const DivergenceDetected& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const DegenerateFunction& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const DegenerateData& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"molecular black-box optimization toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto add_seed = [&f](CLI::App* sub) {
    sub->add_option("--seed", f.seed, "seed overriding the config value")
        ->each([&f](const std::string&) { f.seed_set = true; });
  };
  auto add_threads = [&f](CLI::App* sub) {
    sub->add_option("--threads", f.threads, "worker thread count (0 = default)");
  };

  CLI::App* ingest =
      app.add_subcommand("ingest", "parse a SMILES corpus into a pool cache");
  ingest->add_option("input", f.input, "corpus file, one SMILES per line")
      ->required();
  ingest->add_option("--out", f.out, "pool cache output path")->required();
  ingest->add_option("--config", f.config, "JSON config (fingerprint block)");
  add_threads(ingest);

  CLI::App* train_cmd =
      app.add_subcommand("train", "train the in-context surrogate");
  train_cmd->add_option("--pool", f.pool, "pool cache path")->required();
  train_cmd->add_option("--out", f.out, "checkpoint output path")->required();
  train_cmd->add_option("--config", f.config,
                        "JSON config (model/schedule/sampler blocks)");
  train_cmd->add_option("--steps", f.steps, "override the schedule step count");
  train_cmd->add_option("--batch-size", f.batch_size, "override the batch size");
  train_cmd->add_option("--stop-after", f.stop_after,
                        "pause after this global step (resume later)");
  train_cmd->add_flag("--resume", f.resume,
                      "continue training from the checkpoint at --out");
  train_cmd->add_option("--loss-out", f.loss_out,
                        "loss trace CSV path (default <out>.loss.csv)");
  add_seed(train_cmd);
  add_threads(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand(
      "eval-surrogate", "score a checkpoint and a GP baseline on held-out functions");
  eval_cmd->add_option("--pool", f.pool, "pool cache path")->required();
  eval_cmd->add_option("--checkpoint", f.checkpoint, "trained checkpoint path")
      ->required();
  eval_cmd->add_option("--out", f.out, "metrics CSV output path")->required();
  eval_cmd->add_option("--config", f.config, "JSON config (eval-set keys)");
  add_seed(eval_cmd);
  add_threads(eval_cmd);

  CLI::App* optimize_cmd =
      app.add_subcommand("optimize", "run a benchmark sweep from a config file");
  optimize_cmd->add_option("--config", f.config, "sweep config JSON")->required();
  optimize_cmd->add_option("--pool", f.pool, "pool cache overriding the config");
  optimize_cmd->add_option("--out", f.out,
                           "output directory overriding the config");
  add_seed(optimize_cmd);
  add_threads(optimize_cmd);

  CLI::App* descriptors_cmd = app.add_subcommand(
      "descriptors", "print the descriptor vector of one SMILES");
  descriptors_cmd->add_option("smiles", f.smiles, "molecule SMILES")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run '" << (argc > 0 ? argv[0] : "molbbo")
              << " --help' for usage\n";
    return 1;
  }

  apply_threads(f.threads);
  if (ingest->parsed()) return guard([&] { return cmd_ingest(f); });
  if (train_cmd->parsed()) return guard([&] { return cmd_train(f); });
  if (eval_cmd->parsed()) return guard([&] { return cmd_eval_surrogate(f); });
  if (optimize_cmd->parsed()) return guard([&] { return cmd_optimize(f); });
  if (descriptors_cmd->parsed()) return guard([&] { return cmd_descriptors(f); });
  std::cerr << "no subcommand given\n";
  return 1;
}
