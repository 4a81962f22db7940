#pragma once
// Held-out evaluation of probabilistic surrogates.  Fixed evaluation
// functions (context pairs plus disjoint target pairs, jointly standardized)
// are scored at several context lengths with negative log likelihood, mean
// squared error, and RMS calibration error over central credible intervals.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "molbbo/datagen.hpp"
#include "molbbo/fingerprint.hpp"
#include "molbbo/icl.hpp"

namespace molbbo {

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement step; relative error far below 1e-12 across (0, 1)).
// Throws std::invalid_argument outside (0, 1).
double normal_quantile(double p);

// One held-out task: predict the target values from (a prefix of) the
// context.  Context and target molecules are disjoint and their values were
// standardized jointly, so targets are on the context's scale.
struct EvalFunction {
  std::vector<Fingerprint> context_x;
  std::vector<double> context_y;
  std::vector<Fingerprint> target_x;
  std::vector<double> target_y;
  SequenceSource source;
};

struct EvalSetConfig {
  int n_functions = 16;
  int n_context = 128;
  int n_target = 32;
  double synthetic_ratio = 0.1;  // fraction of smooth synthetic functions
  std::uint64_t seed = 0;
};

// Deterministically builds the evaluation set from held-out descriptor
// functions (plus synthetic draws).  Each function uses n_context + n_target
// distinct pool molecules; the pool must be at least that large.
std::vector<EvalFunction> build_eval_functions(const Pool& pool,
                                               const DescriptorRegistry& registry,
                                               const EvalSetConfig& cfg);

// A probabilistic regressor: Gaussian predictions for the targets given the
// context.
using PredictorFn = std::function<std::vector<Prediction>(
    const std::vector<Fingerprint>& context_x, const std::vector<double>& context_y,
    const std::vector<Fingerprint>& target_x)>;

// Tanimoto-GP baseline: grid-search MLE hyperparameters on the context, then
// exact posterior prediction.  Constant contexts fall back to a broad prior.
PredictorFn gp_predictor();

// In-context transformer: one forward pass per candidate batch.  The model
// reference must outlive the returned closure.
PredictorFn icl_predictor(const Parameters& params);

struct MetricRow {
  int function_index = 0;
  std::string source;  // "intrinsic:<descriptor>" or "synthetic:<seed>"
  int context = 0;     // context pairs shown to the predictor
  double nll = 0.0;    // mean Gaussian negative log likelihood over targets
  double mse = 0.0;    // mean squared error of the predictive mean
  double rmsce = 0.0;  // RMS gap between nominal and empirical central coverage
};

// Scores one function at one context length.  The predictor sees the first
// `context` context pairs and all targets.  Throws std::invalid_argument when
// `context` exceeds the stored context or a predicted std is not positive.
MetricRow evaluate_function(const EvalFunction& fn, int function_index, int context,
                            const PredictorFn& predict);

// All (function, context) rows for one predictor, functions outermost.
std::vector<MetricRow> evaluate_surrogate(const std::vector<EvalFunction>& fns,
                                          const std::vector<int>& contexts,
                                          const PredictorFn& predict);

// Mean of a metric over the rows at one context length; throws
// std::invalid_argument when no row matches.
double mean_nll(const std::vector<MetricRow>& rows, int context);
double mean_mse(const std::vector<MetricRow>& rows, int context);

// Flat table: function,source,context,method,nll,mse,rmsce -- one block per
// (method, rows) pair, rows in order.
std::string metric_rows_csv(
    const std::vector<std::pair<std::string, std::vector<MetricRow>>>& by_method);

}  // namespace molbbo
