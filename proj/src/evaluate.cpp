#include "molbbo/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "molbbo/descriptors.hpp"
#include "molbbo/gp.hpp"

namespace molbbo {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Nominal central-interval coverage levels for the calibration metric.
constexpr double kCoverageLevels[] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

}  // namespace

namespace {

// Quantile for p in (0, 0.5]: Acklam's rational approximation (relative
// error < 1.15e-9) plus one Halley step against the exact CDF.  Working only
// on the lower half keeps the CDF residual free of cancellation: for x <= 0
// the CDF is 0.5 * erfc(-x / sqrt 2), which stays fully accurate in the tail.
double lower_half_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal quantile needs p in (0, 1)");
  }
  if (p > 0.5) return -lower_half_quantile(1.0 - p);
  return lower_half_quantile(p);
}

std::vector<EvalFunction> build_eval_functions(const Pool& pool,
                                               const DescriptorRegistry& registry,
                                               const EvalSetConfig& cfg) {
  if (cfg.n_functions < 1) throw std::invalid_argument("need at least one eval function");
  if (cfg.n_context < 1 || cfg.n_target < 1) {
    throw std::invalid_argument("context and target counts must be positive");
  }
  const int total = cfg.n_context + cfg.n_target;
  if (static_cast<std::size_t>(total) > pool.size()) {
    throw std::invalid_argument("pool too small for context plus target pairs");
  }
  SamplerConfig sampler;
  sampler.synthetic_ratio = cfg.synthetic_ratio;
  sampler.n_min = total;
  sampler.n_max = total;
  sampler.seed = cfg.seed;
  const std::vector<TrainingSequence> seqs =
      heldout_eval_set(pool, registry, sampler, cfg.n_functions);

  std::vector<EvalFunction> out;
  out.reserve(seqs.size());
  for (const TrainingSequence& seq : seqs) {
    EvalFunction fn;
    fn.source = seq.source;
    const std::size_t split = static_cast<std::size_t>(cfg.n_context);
    fn.context_x.assign(seq.xs.begin(), seq.xs.begin() + static_cast<std::ptrdiff_t>(split));
    fn.context_y.assign(seq.ys.begin(), seq.ys.begin() + static_cast<std::ptrdiff_t>(split));
    fn.target_x.assign(seq.xs.begin() + static_cast<std::ptrdiff_t>(split), seq.xs.end());
    fn.target_y.assign(seq.ys.begin() + static_cast<std::ptrdiff_t>(split), seq.ys.end());
    out.push_back(std::move(fn));
  }
  return out;
}

PredictorFn gp_predictor() {
  return [](const std::vector<Fingerprint>& context_x, const std::vector<double>& context_y,
            const std::vector<Fingerprint>& target_x) {
    GpHyperparams hyper{1.0, 1e-2};  // broad-prior fallback for flat contexts
    try {
      hyper = TanimotoGP::fit_mle(context_x, context_y);
    } catch (const DegenerateData&) {
    }
    const TanimotoGP gp(context_x, context_y, hyper);
    const GpPrediction pred = gp.predict(target_x);
    std::vector<Prediction> out;
    out.reserve(target_x.size());
    for (std::size_t i = 0; i < target_x.size(); ++i) {
      out.push_back(Prediction{pred.mean[i], pred.std[i]});
    }
    return out;
  };
}

PredictorFn icl_predictor(const Parameters& params) {
  return [&params](const std::vector<Fingerprint>& context_x,
                   const std::vector<double>& context_y,
                   const std::vector<Fingerprint>& target_x) {
    return predict_incontext(params, context_x, context_y, target_x);
  };
}

namespace {

std::string source_label(const SequenceSource& source) {
  if (source.kind == SequenceSource::Kind::Intrinsic) {
    return "intrinsic:" + std::string(descriptor_name(source.descriptor));
  }
  return "synthetic:" + std::to_string(source.seed);
}

}  // namespace

MetricRow evaluate_function(const EvalFunction& fn, int function_index, int context,
                            const PredictorFn& predict) {
  if (context < 1 || static_cast<std::size_t>(context) > fn.context_x.size()) {
    throw std::invalid_argument("context length outside the stored context");
  }
  if (fn.target_x.empty() || fn.target_x.size() != fn.target_y.size()) {
    throw std::invalid_argument("malformed target block");
  }
  const std::vector<Fingerprint> ctx_x(fn.context_x.begin(), fn.context_x.begin() + context);
  const std::vector<double> ctx_y(fn.context_y.begin(), fn.context_y.begin() + context);
  const std::vector<Prediction> preds = predict(ctx_x, ctx_y, fn.target_x);
  if (preds.size() != fn.target_x.size()) {
    throw std::invalid_argument("predictor returned the wrong number of predictions");
  }
  const std::size_t n = preds.size();
  double nll_sum = 0.0;
  double mse_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = preds[i].mean;
    const double sigma = preds[i].std;
    if (!(sigma > 0.0)) throw std::invalid_argument("non-positive predicted std");
    const double err = fn.target_y[i] - mu;
    nll_sum += 0.5 * std::log(2.0 * kPi * sigma * sigma) + err * err / (2.0 * sigma * sigma);
    mse_sum += err * err;
  }
  double sq = 0.0;
  for (const double level : kCoverageLevels) {
    const double z = normal_quantile((1.0 + level) / 2.0);
    int covered = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(fn.target_y[i] - preds[i].mean) <= z * preds[i].std) ++covered;
    }
    const double empirical = static_cast<double>(covered) / static_cast<double>(n);
    sq += (empirical - level) * (empirical - level);
  }
  MetricRow row;
  row.function_index = function_index;
  row.source = source_label(fn.source);
  row.context = context;
  row.nll = nll_sum / static_cast<double>(n);
  row.mse = mse_sum / static_cast<double>(n);
  row.rmsce = std::sqrt(sq / 9.0);
  return row;
}

std::vector<MetricRow> evaluate_surrogate(const std::vector<EvalFunction>& fns,
                                          const std::vector<int>& contexts,
                                          const PredictorFn& predict) {
  std::vector<MetricRow> rows;
  rows.reserve(fns.size() * contexts.size());
  for (std::size_t f = 0; f < fns.size(); ++f) {
    for (const int ctx : contexts) {
      rows.push_back(evaluate_function(fns[f], static_cast<int>(f), ctx, predict));
    }
  }
  return rows;
}

namespace {

double mean_of(const std::vector<MetricRow>& rows, int context, double MetricRow::* field) {
  double sum = 0.0;
  int count = 0;
  for (const MetricRow& r : rows) {
    if (r.context == context) {
      sum += r.*field;
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("no rows at the requested context length");
  return sum / static_cast<double>(count);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double mean_nll(const std::vector<MetricRow>& rows, int context) {
  return mean_of(rows, context, &MetricRow::nll);
}

double mean_mse(const std::vector<MetricRow>& rows, int context) {
  return mean_of(rows, context, &MetricRow::mse);
}

std::string metric_rows_csv(
    const std::vector<std::pair<std::string, std::vector<MetricRow>>>& by_method) {
  std::string out = "function,source,context,method,nll,mse,rmsce\n";
  for (const auto& [method, rows] : by_method) {
    for (const MetricRow& r : rows) {
      out += std::to_string(r.function_index);
      out += ',';
      out += r.source;
      out += ',';
      out += std::to_string(r.context);
      out += ',';
      out += method;
      out += ',';
      out += format_double(r.nll);
      out += ',';
      out += format_double(r.mse);
      out += ',';
      out += format_double(r.rmsce);
      out += '\n';
    }
  }
  return out;
}

}  // namespace molbbo
