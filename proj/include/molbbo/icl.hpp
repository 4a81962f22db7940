// In-context learned surrogate: a small causal transformer trained from
// scratch to predict a Gaussian distribution over the next function value
// given an interleaved sequence of (fingerprint, value) pairs.
//
// Sequence layout for n pairs (1 + 4n tokens):
//   [task_prefix, <x>, embed(x_1), <y>, embed(y_1), <x>, embed(x_2), ...]
// where <x>/<y> are learned marker vectors.  The model reads its prediction
// at each <y> token (position 4i + 3), which under the causal mask sees
// x_{1..i+1} and y_{1..i} only.  Pre-layernorm blocks, fixed sinusoidal
// position encodings added after embedding, a 2-layer GELU perceptron for
// each of the x and y embedders, and a linear head producing (mean, log-std)
// with the log-std hard-clamped before exponentiation.
//
// Everything runs in 64-bit floats with exact hand-written reverse-mode
// gradients; training is plain Adam with linear warmup and cosine decay.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molbbo/fingerprint.hpp"

namespace molbbo {

struct ModelConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int x_dim = 2048;       // fingerprint width
  int embed_hidden = 256;  // hidden width of the x/y embedders
  int max_pairs = 512;    // sequence capacity
  double logstd_min = -5.0;
  double logstd_max = 5.0;

  int head_dim() const { return d_model / n_heads; }
  int ff_hidden() const { return 4 * d_model; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class CapacityExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DivergenceDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VersionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
};

// The complete parameter set, stored as named tensors in a fixed
// construction order (the checkpoint tensor order).  Also reused as the
// container for gradients and Adam moments.
class Parameters {
 public:
  explicit Parameters(const ModelConfig& config);

  // Weights ~ N(0, 0.02^2), biases 0, layernorm gains 1; deterministic.
  void random_init(std::uint64_t seed);
  void zero();

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  const ModelConfig& config() const { return config_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

 private:
  ModelConfig config_;
  std::vector<Tensor> tensors_;
};

struct SequenceItem {
  std::vector<Fingerprint> xs;
  std::vector<double> ys;  // normalized targets, one per fingerprint
};

struct SequenceBatch {
  std::vector<SequenceItem> items;
};

struct Prediction {
  double mean = 0.0;
  double std = 1.0;
};

struct BuiltSequence {
  int length = 0;                // 1 + 4n tokens
  std::vector<int> y_positions;  // index of each <y> marker token
  std::vector<double> tokens;    // length x d_model, before position encoding
};

// Token layout only (embedders + markers, no transformer); exposed for
// layout and determinism tests.
BuiltSequence build_sequence(const Parameters& params, const SequenceItem& item);

// Predictions at every <y> position of every item.
std::vector<std::vector<Prediction>> forward(const Parameters& params,
                                             const SequenceBatch& batch);

// Mean over entries of 0.5 log(2 pi) + log std + (y - mean)^2 / (2 std^2).
double nll_loss(const std::vector<Prediction>& predictions,
                const std::vector<double>& targets);

// Training loss: per-item mean NLL, then mean over items.
double batch_nll(const Parameters& params, const SequenceBatch& batch);

// Exact gradients of loss_scale * batch_nll; also returns the loss.
struct BackwardResult {
  double loss = 0.0;
  Parameters grads;
};
BackwardResult backward(const Parameters& params, const SequenceBatch& batch,
                        double loss_scale = 1.0);

struct TrainSchedule {
  int steps = 1000;
  int batch_size = 8;
  double base_lr = 3e-4;
  int warmup_steps = 300;
  double clip_norm = 1.0;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const Parameters& params);
};

struct TrainResult {
  std::vector<double> loss_trace;  // one entry per step
};

// Streams batches by step index; must be deterministic in the step number.
using BatchStream = std::function<SequenceBatch(int step)>;

// Adam (0.9 / 0.999 / 1e-8) with global-norm gradient clipping, linear
// warmup to base_lr then cosine decay to zero.  `state` carries optimizer
// moments across calls (resume); training continues from state->step.
// A non-negative stop_step pauses once state->step reaches it while keeping
// the learning-rate horizon at schedule.steps, so a paused-and-resumed run
// reproduces an uninterrupted one step for step.  Throws DivergenceDetected
// on a NaN/Inf loss.
TrainResult train(Parameters& params, const BatchStream& stream,
                  const TrainSchedule& schedule, AdamState* state = nullptr,
                  int stop_step = -1);

// Condition on ordered observations, then predict each candidate from the
// sequence [obs_1..obs_m, <x>, embed(candidate), <y>] read at the final <y>.
// The shared observation prefix is computed once and reused (per-layer
// key/value cache); results are bit-identical to the naive full forward.
std::vector<Prediction> predict_incontext(const Parameters& params,
                                          const std::vector<Fingerprint>& obs_x,
                                          const std::vector<double>& obs_y,
                                          const std::vector<Fingerprint>& candidates);

// Binary checkpoint: magic "LICB", version u32, config, then named tensors
// (little-endian f64).  With `adam`, optimizer moments and the step counter
// are stored alongside the parameters for exact training resume.
void save_checkpoint(const Parameters& params, const std::string& path,
                     const AdamState* adam = nullptr);

// Loads parameters (and Adam state if `adam` non-null and present in the
// file; zeroed otherwise).  If `expected` is non-null the stored config must
// match it (else VersionMismatch).  Malformed files raise FormatError;
// unknown versions raise VersionMismatch.
Parameters load_checkpoint(const std::string& path, AdamState* adam = nullptr,
                           const ModelConfig* expected = nullptr);

}  // namespace molbbo
