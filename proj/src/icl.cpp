#include "molbbo/icl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "molbbo/rng.hpp"
#include "molbbo/tensor.hpp"

namespace molbbo {

namespace t = molbbo::tensor;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

std::string block_name(int layer, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "block%d.%s", layer, suffix);
  return buf;
}

// ---------------------------------------------------------------- positional

// Fixed sinusoidal encoding: pe[pos][2i] = sin(pos / 10000^{2i/d}),
// pe[pos][2i+1] = cos(same).
void add_pe_row(double* row, int pos, int d) {
  for (int i = 0; 2 * i < d; ++i) {
    const double freq = std::exp(-std::log(10000.0) * (2.0 * i / d));
    const double angle = pos * freq;
    row[2 * i] += std::sin(angle);
    if (2 * i + 1 < d) row[2 * i + 1] += std::cos(angle);
  }
}

void add_position_encoding(double* x, int t_len, int d) {
  for (int pos = 0; pos < t_len; ++pos) {
    add_pe_row(x + static_cast<long>(pos) * d, pos, d);
  }
}

// ------------------------------------------------------------ forward caches

struct BlockCache {
  std::vector<double> x_in;      // t x d, block input (residual stream)
  std::vector<double> ln1_out;   // t x d
  std::vector<double> ln1_mean, ln1_rstd;
  std::vector<double> q, k, v;   // t x d
  std::vector<double> probs;     // heads x t x t, masked softmax rows
  std::vector<double> att_cat;   // t x d, per-head outputs concatenated
  std::vector<double> x_mid;     // t x d, after attention residual
  std::vector<double> ln2_out;   // t x d
  std::vector<double> ln2_mean, ln2_rstd;
  std::vector<double> ff_pre;    // t x ff
  std::vector<double> ff_act;    // t x ff
};

struct SeqCache {
  int n = 0;
  int t_len = 0;
  std::vector<int> y_positions;
  std::vector<double> xh_pre, xh_act;  // n x eh, x-embedder hidden
  std::vector<double> yh_pre, yh_act;  // n x eh, y-embedder hidden
  std::vector<double> x0;              // t x d, tokens + position encoding
  std::vector<BlockCache> blocks;
  std::vector<double> x_final;         // t x d, last block output
  std::vector<double> fln_out;         // t x d
  std::vector<double> fln_mean, fln_rstd;
  std::vector<double> raw_head;        // n x 2, (mean, raw log-std) per y position
};

// Gather head columns [h*dh, (h+1)*dh) of src (rows x d) into dst (rows x dh).
void gather_head(double* dst, const double* src, int rows, int d, int h, int dh) {
  for (int r = 0; r < rows; ++r) {
    std::memcpy(dst + static_cast<long>(r) * dh,
                src + static_cast<long>(r) * d + h * dh,
                static_cast<std::size_t>(dh) * sizeof(double));
  }
}

void scatter_head(double* dst, const double* src, int rows, int d, int h, int dh) {
  for (int r = 0; r < rows; ++r) {
    std::memcpy(dst + static_cast<long>(r) * d + h * dh,
                src + static_cast<long>(r) * dh,
                static_cast<std::size_t>(dh) * sizeof(double));
  }
}

void scatter_head_add(double* dst, const double* src, int rows, int d, int h, int dh) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < dh; ++c) {
      dst[static_cast<long>(r) * d + h * dh + c] += src[static_cast<long>(r) * dh + c];
    }
  }
}

// out = x * w + bias, all row-major
void linear(double* out, const double* x, const double* w, const double* bias,
            int rows, int din, int dout) {
  t::matmul_nn(out, x, w, rows, din, dout);
  t::add_bias(out, bias, rows, dout);
}

// -------------------------------------------------------------- embedders

struct EmbedderView {
  const double* w1;
  const double* b1;
  const double* w2;
  const double* b2;
};

EmbedderView x_embedder(const Parameters& p) {
  return {p.at("x_embed.w1").v.data(), p.at("x_embed.b1").v.data(),
          p.at("x_embed.w2").v.data(), p.at("x_embed.b2").v.data()};
}

EmbedderView y_embedder(const Parameters& p) {
  return {p.at("y_embed.w1").v.data(), p.at("y_embed.b1").v.data(),
          p.at("y_embed.w2").v.data(), p.at("y_embed.b2").v.data()};
}

// Fingerprint bits are 0/1, so the first linear layer is a sparse sum of the
// rows of w1 at the set bits.
void embed_x(const Parameters& p, const Fingerprint& fp, double* h_pre, double* h_act,
             double* out) {
  const ModelConfig& cfg = p.config();
  const int eh = cfg.embed_hidden;
  const int d = cfg.d_model;
  const EmbedderView e = x_embedder(p);
  std::memcpy(h_pre, e.b1, static_cast<std::size_t>(eh) * sizeof(double));
  for (int bit = 0; bit < cfg.x_dim; ++bit) {
    if (!fp.test(bit)) continue;
    const double* row = e.w1 + static_cast<long>(bit) * eh;
    for (int j = 0; j < eh; ++j) h_pre[j] += row[j];
  }
  t::gelu_forward(h_act, h_pre, static_cast<std::size_t>(eh));
  t::matmul_nn(out, h_act, e.w2, 1, eh, d);
  for (int j = 0; j < d; ++j) out[j] += e.b2[j];
}

void embed_y(const Parameters& p, double y, double* h_pre, double* h_act, double* out) {
  const ModelConfig& cfg = p.config();
  const int eh = cfg.embed_hidden;
  const int d = cfg.d_model;
  const EmbedderView e = y_embedder(p);
  for (int j = 0; j < eh; ++j) h_pre[j] = e.b1[j] + y * e.w1[j];
  t::gelu_forward(h_act, h_pre, static_cast<std::size_t>(eh));
  t::matmul_nn(out, h_act, e.w2, 1, eh, d);
  for (int j = 0; j < d; ++j) out[j] += e.b2[j];
}

// --------------------------------------------------------- attention forward

// Masked multi-head self-attention: query rows are absolute sequence rows
// [row_begin, t_len) against keys/values rows [0, t_len); query row i may see
// keys j <= i.  q_rows points at the first query row (n_rows x d with
// n_rows = t_len - row_begin); k/v are t_len x d; probs has space for
// heads x n_rows x t_len; att_cat receives n_rows x d.
void attention_forward(const ModelConfig& cfg, const double* q_rows, const double* k,
                       const double* v, int t_len, int row_begin, double* probs,
                       double* att_cat) {
  const int d = cfg.d_model;
  const int dh = cfg.head_dim();
  const int n_rows = t_len - row_begin;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> qh(static_cast<std::size_t>(n_rows) * dh);
  std::vector<double> kh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> vh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> oh(static_cast<std::size_t>(n_rows) * dh);
  for (int h = 0; h < cfg.n_heads; ++h) {
    gather_head(qh.data(), q_rows, n_rows, d, h, dh);
    gather_head(kh.data(), k, t_len, d, h, dh);
    gather_head(vh.data(), v, t_len, d, h, dh);
    double* ph = probs + static_cast<long>(h) * n_rows * t_len;
    t::matmul_nt(ph, qh.data(), kh.data(), n_rows, dh, t_len);
    for (int r = 0; r < n_rows; ++r) {
      double* row = ph + static_cast<long>(r) * t_len;
      const int visible = row_begin + r + 1;  // keys 0..row index inclusive
      for (int j = 0; j < visible; ++j) row[j] *= scale;
      t::softmax_inplace(row, visible);
      for (int j = visible; j < t_len; ++j) row[j] = 0.0;
    }
    t::matmul_nn(oh.data(), ph, vh.data(), n_rows, t_len, dh);
    scatter_head(att_cat, oh.data(), n_rows, d, h, dh);
  }
}

// ------------------------------------------------------------- full forward

struct ParamView {
  const double* ln1_gain;
  const double* ln1_bias;
  const double* wq;
  const double* bq;
  const double* wk;
  const double* bk;
  const double* wv;
  const double* bv;
  const double* wo;
  const double* bo;
  const double* ln2_gain;
  const double* ln2_bias;
  const double* ff_w1;
  const double* ff_b1;
  const double* ff_w2;
  const double* ff_b2;
};

ParamView block_view(const Parameters& p, int layer) {
  return {p.at(block_name(layer, "ln1.gain")).v.data(),
          p.at(block_name(layer, "ln1.bias")).v.data(),
          p.at(block_name(layer, "attn.wq")).v.data(),
          p.at(block_name(layer, "attn.bq")).v.data(),
          p.at(block_name(layer, "attn.wk")).v.data(),
          p.at(block_name(layer, "attn.bk")).v.data(),
          p.at(block_name(layer, "attn.wv")).v.data(),
          p.at(block_name(layer, "attn.bv")).v.data(),
          p.at(block_name(layer, "attn.wo")).v.data(),
          p.at(block_name(layer, "attn.bo")).v.data(),
          p.at(block_name(layer, "ln2.gain")).v.data(),
          p.at(block_name(layer, "ln2.bias")).v.data(),
          p.at(block_name(layer, "ff.w1")).v.data(),
          p.at(block_name(layer, "ff.b1")).v.data(),
          p.at(block_name(layer, "ff.w2")).v.data(),
          p.at(block_name(layer, "ff.b2")).v.data()};
}

void check_item(const ModelConfig& cfg, const SequenceItem& item) {
  if (item.xs.empty() || item.xs.size() != item.ys.size()) {
    throw std::invalid_argument("sequence item needs equal, nonzero xs and ys");
  }
  if (static_cast<int>(item.xs.size()) > cfg.max_pairs) {
    throw CapacityExceeded("sequence of " + std::to_string(item.xs.size()) +
                           " pairs exceeds max_pairs " +
                           std::to_string(cfg.max_pairs));
  }
  for (const Fingerprint& fp : item.xs) {
    if (fp.nbits != cfg.x_dim) {
      throw std::invalid_argument("fingerprint width does not match model x_dim");
    }
  }
  for (double y : item.ys) {
    if (!std::isfinite(y)) throw std::invalid_argument("non-finite target value");
  }
}

// Builds the token sequence and runs every transformer block, filling the
// cache for a later backward pass.
void forward_item(const Parameters& p, const SequenceItem& item, SeqCache& c) {
  const ModelConfig& cfg = p.config();
  check_item(cfg, item);
  const int d = cfg.d_model;
  const int eh = cfg.embed_hidden;
  const int ff = cfg.ff_hidden();
  const int n = static_cast<int>(item.xs.size());
  const int t_len = 1 + 4 * n;
  c.n = n;
  c.t_len = t_len;

  // tokens
  c.x0.assign(static_cast<std::size_t>(t_len) * d, 0.0);
  c.xh_pre.resize(static_cast<std::size_t>(n) * eh);
  c.xh_act.resize(static_cast<std::size_t>(n) * eh);
  c.yh_pre.resize(static_cast<std::size_t>(n) * eh);
  c.yh_act.resize(static_cast<std::size_t>(n) * eh);
  c.y_positions.resize(static_cast<std::size_t>(n));
  const double* task_prefix = p.at("task_prefix").v.data();
  const double* marker_x = p.at("marker_x").v.data();
  const double* marker_y = p.at("marker_y").v.data();
  std::memcpy(c.x0.data(), task_prefix, static_cast<std::size_t>(d) * sizeof(double));
  for (int i = 0; i < n; ++i) {
    double* mx = c.x0.data() + static_cast<long>(1 + 4 * i) * d;
    double* ex = c.x0.data() + static_cast<long>(2 + 4 * i) * d;
    double* my = c.x0.data() + static_cast<long>(3 + 4 * i) * d;
    double* ey = c.x0.data() + static_cast<long>(4 + 4 * i) * d;
    std::memcpy(mx, marker_x, static_cast<std::size_t>(d) * sizeof(double));
    std::memcpy(my, marker_y, static_cast<std::size_t>(d) * sizeof(double));
    embed_x(p, item.xs[static_cast<std::size_t>(i)],
            c.xh_pre.data() + static_cast<long>(i) * eh,
            c.xh_act.data() + static_cast<long>(i) * eh, ex);
    embed_y(p, item.ys[static_cast<std::size_t>(i)],
            c.yh_pre.data() + static_cast<long>(i) * eh,
            c.yh_act.data() + static_cast<long>(i) * eh, ey);
    c.y_positions[static_cast<std::size_t>(i)] = 3 + 4 * i;
  }
  add_position_encoding(c.x0.data(), t_len, d);

  // transformer blocks (pre-layernorm)
  c.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
  const std::size_t td = static_cast<std::size_t>(t_len) * d;
  std::vector<double> stream = c.x0;
  for (int l = 0; l < cfg.n_layers; ++l) {
    BlockCache& bc = c.blocks[static_cast<std::size_t>(l)];
    const ParamView pv = block_view(p, l);
    bc.x_in = stream;
    bc.ln1_out.resize(td);
    bc.ln1_mean.resize(static_cast<std::size_t>(t_len));
    bc.ln1_rstd.resize(static_cast<std::size_t>(t_len));
    t::layernorm_forward(bc.ln1_out.data(), bc.ln1_mean.data(), bc.ln1_rstd.data(),
                         bc.x_in.data(), pv.ln1_gain, pv.ln1_bias, t_len, d);
    bc.q.resize(td);
    bc.k.resize(td);
    bc.v.resize(td);
    linear(bc.q.data(), bc.ln1_out.data(), pv.wq, pv.bq, t_len, d, d);
    linear(bc.k.data(), bc.ln1_out.data(), pv.wk, pv.bk, t_len, d, d);
    linear(bc.v.data(), bc.ln1_out.data(), pv.wv, pv.bv, t_len, d, d);
    bc.probs.resize(static_cast<std::size_t>(cfg.n_heads) * t_len * t_len);
    bc.att_cat.resize(td);
    attention_forward(cfg, bc.q.data(), bc.k.data(), bc.v.data(), t_len,
                      /*row_begin=*/0, bc.probs.data(), bc.att_cat.data());
    // attention output projection + residual
    bc.x_mid.resize(td);
    t::matmul_nn(bc.x_mid.data(), bc.att_cat.data(), pv.wo, t_len, d, d);
    t::add_bias(bc.x_mid.data(), pv.bo, t_len, d);
    for (std::size_t i = 0; i < td; ++i) bc.x_mid[i] += bc.x_in[i];
    // feed-forward + residual
    bc.ln2_out.resize(td);
    bc.ln2_mean.resize(static_cast<std::size_t>(t_len));
    bc.ln2_rstd.resize(static_cast<std::size_t>(t_len));
    t::layernorm_forward(bc.ln2_out.data(), bc.ln2_mean.data(), bc.ln2_rstd.data(),
                         bc.x_mid.data(), pv.ln2_gain, pv.ln2_bias, t_len, d);
    bc.ff_pre.resize(static_cast<std::size_t>(t_len) * ff);
    bc.ff_act.resize(static_cast<std::size_t>(t_len) * ff);
    linear(bc.ff_pre.data(), bc.ln2_out.data(), pv.ff_w1, pv.ff_b1, t_len, d, ff);
    t::gelu_forward(bc.ff_act.data(), bc.ff_pre.data(), bc.ff_act.size());
    stream.assign(td, 0.0);
    t::matmul_nn(stream.data(), bc.ff_act.data(), pv.ff_w2, t_len, ff, d);
    t::add_bias(stream.data(), pv.ff_b2, t_len, d);
    for (std::size_t i = 0; i < td; ++i) stream[i] += bc.x_mid[i];
  }
  c.x_final = std::move(stream);

  // final layernorm + head at the <y> positions
  c.fln_out.resize(td);
  c.fln_mean.resize(static_cast<std::size_t>(t_len));
  c.fln_rstd.resize(static_cast<std::size_t>(t_len));
  t::layernorm_forward(c.fln_out.data(), c.fln_mean.data(), c.fln_rstd.data(),
                       c.x_final.data(), p.at("final_ln.gain").v.data(),
                       p.at("final_ln.bias").v.data(), t_len, d);
  const double* head_w = p.at("head.w").v.data();
  const double* head_b = p.at("head.b").v.data();
  c.raw_head.resize(static_cast<std::size_t>(n) * 2);
  for (int i = 0; i < n; ++i) {
    const double* row = c.fln_out.data() + static_cast<long>(c.y_positions[static_cast<std::size_t>(i)]) * d;
    double mu = head_b[0];
    double ls = head_b[1];
    for (int j = 0; j < d; ++j) {
      mu += row[j] * head_w[2 * j];
      ls += row[j] * head_w[2 * j + 1];
    }
    c.raw_head[static_cast<std::size_t>(i) * 2] = mu;
    c.raw_head[static_cast<std::size_t>(i) * 2 + 1] = ls;
  }
}

Prediction prediction_from_raw(const ModelConfig& cfg, double mu, double raw_logstd) {
  const double ls = std::clamp(raw_logstd, cfg.logstd_min, cfg.logstd_max);
  return {mu, std::exp(ls)};
}

std::vector<Prediction> predictions_from_cache(const ModelConfig& cfg, const SeqCache& c) {
  std::vector<Prediction> out(static_cast<std::size_t>(c.n));
  for (int i = 0; i < c.n; ++i) {
    out[static_cast<std::size_t>(i)] =
        prediction_from_raw(cfg, c.raw_head[static_cast<std::size_t>(i) * 2],
                            c.raw_head[static_cast<std::size_t>(i) * 2 + 1]);
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------- construction

Parameters::Parameters(const ModelConfig& config) : config_(config) {
  if (config.d_model < 1 || config.n_layers < 1 || config.n_heads < 1 ||
      config.x_dim < 1 || config.embed_hidden < 1 || config.max_pairs < 1 ||
      config.d_model % config.n_heads != 0) {
    throw std::invalid_argument("invalid model configuration");
  }
  const int d = config.d_model;
  const int eh = config.embed_hidden;
  const int ff = config.ff_hidden();
  auto add = [&](std::string name, std::vector<int> dims) {
    std::size_t size = 1;
    for (int x : dims) size *= static_cast<std::size_t>(x);
    tensors_.push_back({std::move(name), std::move(dims), std::vector<double>(size, 0.0)});
  };
  add("task_prefix", {d});
  add("marker_x", {d});
  add("marker_y", {d});
  add("x_embed.w1", {config.x_dim, eh});
  add("x_embed.b1", {eh});
  add("x_embed.w2", {eh, d});
  add("x_embed.b2", {d});
  add("y_embed.w1", {eh});
  add("y_embed.b1", {eh});
  add("y_embed.w2", {eh, d});
  add("y_embed.b2", {d});
  for (int l = 0; l < config.n_layers; ++l) {
    add(block_name(l, "ln1.gain"), {d});
    add(block_name(l, "ln1.bias"), {d});
    add(block_name(l, "attn.wq"), {d, d});
    add(block_name(l, "attn.bq"), {d});
    add(block_name(l, "attn.wk"), {d, d});
    add(block_name(l, "attn.bk"), {d});
    add(block_name(l, "attn.wv"), {d, d});
    add(block_name(l, "attn.bv"), {d});
    add(block_name(l, "attn.wo"), {d, d});
    add(block_name(l, "attn.bo"), {d});
    add(block_name(l, "ln2.gain"), {d});
    add(block_name(l, "ln2.bias"), {d});
    add(block_name(l, "ff.w1"), {d, ff});
    add(block_name(l, "ff.b1"), {ff});
    add(block_name(l, "ff.w2"), {ff, d});
    add(block_name(l, "ff.b2"), {d});
  }
  add("final_ln.gain", {d});
  add("final_ln.bias", {d});
  add("head.w", {d, 2});
  add("head.b", {2});
}

void Parameters::random_init(std::uint64_t seed) {
  Rng rng(seed);
  for (Tensor& tensor : tensors_) {
    const bool is_gain = tensor.name.find(".gain") != std::string::npos;
    const bool is_bias = tensor.name.find(".bias") != std::string::npos ||
                         tensor.name.find(".b1") != std::string::npos ||
                         tensor.name.find(".b2") != std::string::npos ||
                         tensor.name.find(".bq") != std::string::npos ||
                         tensor.name.find(".bk") != std::string::npos ||
                         tensor.name.find(".bv") != std::string::npos ||
                         tensor.name.find(".bo") != std::string::npos ||
                         tensor.name == "head.b";
    for (double& x : tensor.v) {
      if (is_gain) {
        x = 1.0;
      } else if (is_bias) {
        x = 0.0;
      } else {
        x = 0.02 * rng.normal();
      }
    }
  }
}

void Parameters::zero() {
  for (Tensor& tensor : tensors_) {
    std::fill(tensor.v.begin(), tensor.v.end(), 0.0);
  }
}

Tensor& Parameters::at(std::string_view name) {
  for (Tensor& tensor : tensors_) {
    if (tensor.name == name) return tensor;
  }
  throw std::out_of_range("no tensor named " + std::string(name));
}

const Tensor& Parameters::at(std::string_view name) const {
  return const_cast<Parameters*>(this)->at(name);
}

// ---------------------------------------------------------------- sequences

BuiltSequence build_sequence(const Parameters& params, const SequenceItem& item) {
  const ModelConfig& cfg = params.config();
  check_item(cfg, item);
  const int d = cfg.d_model;
  const int eh = cfg.embed_hidden;
  const int n = static_cast<int>(item.xs.size());
  BuiltSequence out;
  out.length = 1 + 4 * n;
  out.tokens.assign(static_cast<std::size_t>(out.length) * d, 0.0);
  std::vector<double> h_pre(static_cast<std::size_t>(eh));
  std::vector<double> h_act(static_cast<std::size_t>(eh));
  std::memcpy(out.tokens.data(), params.at("task_prefix").v.data(),
              static_cast<std::size_t>(d) * sizeof(double));
  const double* marker_x = params.at("marker_x").v.data();
  const double* marker_y = params.at("marker_y").v.data();
  for (int i = 0; i < n; ++i) {
    std::memcpy(out.tokens.data() + static_cast<long>(1 + 4 * i) * d, marker_x,
                static_cast<std::size_t>(d) * sizeof(double));
    std::memcpy(out.tokens.data() + static_cast<long>(3 + 4 * i) * d, marker_y,
                static_cast<std::size_t>(d) * sizeof(double));
    embed_x(params, item.xs[static_cast<std::size_t>(i)], h_pre.data(), h_act.data(),
            out.tokens.data() + static_cast<long>(2 + 4 * i) * d);
    embed_y(params, item.ys[static_cast<std::size_t>(i)], h_pre.data(), h_act.data(),
            out.tokens.data() + static_cast<long>(4 + 4 * i) * d);
    out.y_positions.push_back(3 + 4 * i);
  }
  return out;
}

std::vector<std::vector<Prediction>> forward(const Parameters& params,
                                             const SequenceBatch& batch) {
  std::vector<std::vector<Prediction>> out;
  out.reserve(batch.items.size());
  SeqCache cache;
  for (const SequenceItem& item : batch.items) {
    forward_item(params, item, cache);
    out.push_back(predictions_from_cache(params.config(), cache));
  }
  return out;
}

double nll_loss(const std::vector<Prediction>& predictions,
                const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) {
    throw std::invalid_argument("nll_loss: size mismatch");
  }
  if (predictions.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double z = (targets[i] - predictions[i].mean) / predictions[i].std;
    acc += kHalfLog2Pi + std::log(predictions[i].std) + 0.5 * z * z;
  }
  return acc / static_cast<double>(predictions.size());
}

double batch_nll(const Parameters& params, const SequenceBatch& batch) {
  if (batch.items.empty()) throw std::invalid_argument("empty batch");
  double acc = 0.0;
  SeqCache cache;
  for (const SequenceItem& item : batch.items) {
    forward_item(params, item, cache);
    acc += nll_loss(predictions_from_cache(params.config(), cache), item.ys);
  }
  return acc / static_cast<double>(batch.items.size());
}

// ----------------------------------------------------------------- backward

namespace {

struct GradView {
  double* ln1_gain;
  double* ln1_bias;
  double* wq;
  double* bq;
  double* wk;
  double* bk;
  double* wv;
  double* bv;
  double* wo;
  double* bo;
  double* ln2_gain;
  double* ln2_bias;
  double* ff_w1;
  double* ff_b1;
  double* ff_w2;
  double* ff_b2;
};

GradView block_grads(Parameters& g, int layer) {
  return {g.at(block_name(layer, "ln1.gain")).v.data(),
          g.at(block_name(layer, "ln1.bias")).v.data(),
          g.at(block_name(layer, "attn.wq")).v.data(),
          g.at(block_name(layer, "attn.bq")).v.data(),
          g.at(block_name(layer, "attn.wk")).v.data(),
          g.at(block_name(layer, "attn.bk")).v.data(),
          g.at(block_name(layer, "attn.wv")).v.data(),
          g.at(block_name(layer, "attn.bv")).v.data(),
          g.at(block_name(layer, "attn.wo")).v.data(),
          g.at(block_name(layer, "attn.bo")).v.data(),
          g.at(block_name(layer, "ln2.gain")).v.data(),
          g.at(block_name(layer, "ln2.bias")).v.data(),
          g.at(block_name(layer, "ff.w1")).v.data(),
          g.at(block_name(layer, "ff.b1")).v.data(),
          g.at(block_name(layer, "ff.w2")).v.data(),
          g.at(block_name(layer, "ff.b2")).v.data()};
}

// Accumulates into `grads` the gradient of item_scale * (this item's mean
// NLL over y positions).  The forward cache `c` must be freshly filled for
// this item.
void backward_item(const Parameters& p, Parameters& grads, const SequenceItem& item,
                   const SeqCache& c, double item_scale) {
  const ModelConfig& cfg = p.config();
  const int d = cfg.d_model;
  const int eh = cfg.embed_hidden;
  const int ff = cfg.ff_hidden();
  const int dh = cfg.head_dim();
  const int n = c.n;
  const int t_len = c.t_len;
  const std::size_t td = static_cast<std::size_t>(t_len) * d;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // head backward, seeding the gradient at the <y> rows of the final
  // layernorm output
  std::vector<double> dfln(td, 0.0);
  {
    const double* head_w = p.at("head.w").v.data();
    double* g_head_w = grads.at("head.w").v.data();
    double* g_head_b = grads.at("head.b").v.data();
    const double pos_w = item_scale / n;
    for (int i = 0; i < n; ++i) {
      const double mu = c.raw_head[static_cast<std::size_t>(i) * 2];
      const double raw_ls = c.raw_head[static_cast<std::size_t>(i) * 2 + 1];
      const double ls = std::clamp(raw_ls, cfg.logstd_min, cfg.logstd_max);
      const double sigma = std::exp(ls);
      const double y = item.ys[static_cast<std::size_t>(i)];
      const double z = (y - mu) / sigma;
      const double dmu = pos_w * (mu - y) / (sigma * sigma);
      // hard clamp: no gradient once the raw log-std has left the window
      const bool inside = raw_ls > cfg.logstd_min && raw_ls < cfg.logstd_max;
      const double dls = inside ? pos_w * (1.0 - z * z) : 0.0;
      const int pos = c.y_positions[static_cast<std::size_t>(i)];
      const double* row = c.fln_out.data() + static_cast<long>(pos) * d;
      double* drow = dfln.data() + static_cast<long>(pos) * d;
      for (int j = 0; j < d; ++j) {
        drow[j] += dmu * head_w[2 * j] + dls * head_w[2 * j + 1];
        g_head_w[2 * j] += row[j] * dmu;
        g_head_w[2 * j + 1] += row[j] * dls;
      }
      g_head_b[0] += dmu;
      g_head_b[1] += dls;
    }
  }

  std::vector<double> dstream(td);
  t::layernorm_backward(dstream.data(), grads.at("final_ln.gain").v.data(),
                        grads.at("final_ln.bias").v.data(), dfln.data(),
                        c.x_final.data(), p.at("final_ln.gain").v.data(),
                        c.fln_mean.data(), c.fln_rstd.data(), t_len, d);

  // transformer blocks in reverse
  std::vector<double> dff_act(static_cast<std::size_t>(t_len) * ff);
  std::vector<double> dff_pre(static_cast<std::size_t>(t_len) * ff);
  std::vector<double> dln2(td), dtmp(td), dxmid(td), datt(td);
  std::vector<double> dq(td), dk(td), dv(td), dln1(td);
  std::vector<double> qh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> kh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> vh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> doh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> dqh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> dkh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> dvh(static_cast<std::size_t>(t_len) * dh);
  std::vector<double> dprob(static_cast<std::size_t>(t_len) * t_len);
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const BlockCache& bc = c.blocks[static_cast<std::size_t>(l)];
    const ParamView pv = block_view(p, l);
    const GradView gv = block_grads(grads, l);

    // feed-forward sublayer; dstream holds d(block output)
    t::matmul_tn(gv.ff_w2, bc.ff_act.data(), dstream.data(), ff, t_len, d, true);
    t::bias_grad(gv.ff_b2, dstream.data(), t_len, d);
    t::matmul_nt(dff_act.data(), dstream.data(), pv.ff_w2, t_len, d, ff);
    t::gelu_backward(dff_pre.data(), dff_act.data(), bc.ff_pre.data(), dff_pre.size());
    t::matmul_tn(gv.ff_w1, bc.ln2_out.data(), dff_pre.data(), d, t_len, ff, true);
    t::bias_grad(gv.ff_b1, dff_pre.data(), t_len, ff);
    t::matmul_nt(dln2.data(), dff_pre.data(), pv.ff_w1, t_len, ff, d);
    t::layernorm_backward(dtmp.data(), gv.ln2_gain, gv.ln2_bias, dln2.data(),
                          bc.x_mid.data(), pv.ln2_gain, bc.ln2_mean.data(),
                          bc.ln2_rstd.data(), t_len, d);
    for (std::size_t i = 0; i < td; ++i) dxmid[i] = dstream[i] + dtmp[i];

    // attention output projection
    t::matmul_tn(gv.wo, bc.att_cat.data(), dxmid.data(), d, t_len, d, true);
    t::bias_grad(gv.bo, dxmid.data(), t_len, d);
    t::matmul_nt(datt.data(), dxmid.data(), pv.wo, t_len, d, d);

    // per-head attention backward
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (int h = 0; h < cfg.n_heads; ++h) {
      gather_head(doh.data(), datt.data(), t_len, d, h, dh);
      gather_head(qh.data(), bc.q.data(), t_len, d, h, dh);
      gather_head(kh.data(), bc.k.data(), t_len, d, h, dh);
      gather_head(vh.data(), bc.v.data(), t_len, d, h, dh);
      const double* ph = bc.probs.data() + static_cast<long>(h) * t_len * t_len;
      t::matmul_nt(dprob.data(), doh.data(), vh.data(), t_len, dh, t_len);
      t::matmul_tn(dvh.data(), ph, doh.data(), t_len, t_len, dh);
      for (int r = 0; r < t_len; ++r) {
        double* drow = dprob.data() + static_cast<long>(r) * t_len;
        const double* prow = ph + static_cast<long>(r) * t_len;
        const int visible = r + 1;
        t::softmax_backward(drow, prow, drow, visible);
        for (int j = 0; j < visible; ++j) drow[j] *= scale;
        for (int j = visible; j < t_len; ++j) drow[j] = 0.0;
      }
      t::matmul_nn(dqh.data(), dprob.data(), kh.data(), t_len, t_len, dh);
      t::matmul_tn(dkh.data(), dprob.data(), qh.data(), t_len, t_len, dh);
      scatter_head(dq.data(), dqh.data(), t_len, d, h, dh);
      scatter_head(dk.data(), dkh.data(), t_len, d, h, dh);
      scatter_head(dv.data(), dvh.data(), t_len, d, h, dh);
    }

    // q/k/v projections back to the first layernorm
    t::matmul_tn(gv.wq, bc.ln1_out.data(), dq.data(), d, t_len, d, true);
    t::bias_grad(gv.bq, dq.data(), t_len, d);
    t::matmul_tn(gv.wk, bc.ln1_out.data(), dk.data(), d, t_len, d, true);
    t::bias_grad(gv.bk, dk.data(), t_len, d);
    t::matmul_tn(gv.wv, bc.ln1_out.data(), dv.data(), d, t_len, d, true);
    t::bias_grad(gv.bv, dv.data(), t_len, d);
    t::matmul_nt(dln1.data(), dq.data(), pv.wq, t_len, d, d);
    t::matmul_nt(dln1.data(), dk.data(), pv.wk, t_len, d, d, true);
    t::matmul_nt(dln1.data(), dv.data(), pv.wv, t_len, d, d, true);
    t::layernorm_backward(dtmp.data(), gv.ln1_gain, gv.ln1_bias, dln1.data(),
                          bc.x_in.data(), pv.ln1_gain, bc.ln1_mean.data(),
                          bc.ln1_rstd.data(), t_len, d);
    for (std::size_t i = 0; i < td; ++i) dstream[i] = dxmid[i] + dtmp[i];
  }

  // token gradients (position encodings are additive constants)
  {
    double* g_task = grads.at("task_prefix").v.data();
    double* g_mx = grads.at("marker_x").v.data();
    double* g_my = grads.at("marker_y").v.data();
    double* g_xw1 = grads.at("x_embed.w1").v.data();
    double* g_xb1 = grads.at("x_embed.b1").v.data();
    double* g_xw2 = grads.at("x_embed.w2").v.data();
    double* g_xb2 = grads.at("x_embed.b2").v.data();
    double* g_yw1 = grads.at("y_embed.w1").v.data();
    double* g_yb1 = grads.at("y_embed.b1").v.data();
    double* g_yw2 = grads.at("y_embed.w2").v.data();
    double* g_yb2 = grads.at("y_embed.b2").v.data();
    const double* x_w2 = p.at("x_embed.w2").v.data();
    const double* y_w2 = p.at("y_embed.w2").v.data();
    std::vector<double> dh_act(static_cast<std::size_t>(eh));
    std::vector<double> dh_pre(static_cast<std::size_t>(eh));
    for (int j = 0; j < d; ++j) g_task[j] += dstream[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
      const double* d_mx = dstream.data() + static_cast<long>(1 + 4 * i) * d;
      const double* d_ex = dstream.data() + static_cast<long>(2 + 4 * i) * d;
      const double* d_my = dstream.data() + static_cast<long>(3 + 4 * i) * d;
      const double* d_ey = dstream.data() + static_cast<long>(4 + 4 * i) * d;
      for (int j = 0; j < d; ++j) {
        g_mx[j] += d_mx[j];
        g_my[j] += d_my[j];
      }
      // x embedder
      const double* h_act = c.xh_act.data() + static_cast<long>(i) * eh;
      const double* h_pre = c.xh_pre.data() + static_cast<long>(i) * eh;
      for (int e = 0; e < eh; ++e) {
        const double* w_row = x_w2 + static_cast<long>(e) * d;
        double* gw_row = g_xw2 + static_cast<long>(e) * d;
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
          acc += w_row[j] * d_ex[j];
          gw_row[j] += h_act[e] * d_ex[j];
        }
        dh_act[static_cast<std::size_t>(e)] = acc;
      }
      for (int j = 0; j < d; ++j) g_xb2[j] += d_ex[j];
      t::gelu_backward(dh_pre.data(), dh_act.data(), h_pre, static_cast<std::size_t>(eh));
      const Fingerprint& fp = item.xs[static_cast<std::size_t>(i)];
      for (int e = 0; e < eh; ++e) g_xb1[e] += dh_pre[static_cast<std::size_t>(e)];
      for (int bit = 0; bit < cfg.x_dim; ++bit) {
        if (!fp.test(bit)) continue;
        double* g_row = g_xw1 + static_cast<long>(bit) * eh;
        for (int e = 0; e < eh; ++e) g_row[e] += dh_pre[static_cast<std::size_t>(e)];
      }
      // y embedder
      h_act = c.yh_act.data() + static_cast<long>(i) * eh;
      h_pre = c.yh_pre.data() + static_cast<long>(i) * eh;
      for (int e = 0; e < eh; ++e) {
        const double* w_row = y_w2 + static_cast<long>(e) * d;
        double* gw_row = g_yw2 + static_cast<long>(e) * d;
        double acc = 0.0;
        for (int j = 0; j < d; ++j) {
          acc += w_row[j] * d_ey[j];
          gw_row[j] += h_act[e] * d_ey[j];
        }
        dh_act[static_cast<std::size_t>(e)] = acc;
      }
      for (int j = 0; j < d; ++j) g_yb2[j] += d_ey[j];
      t::gelu_backward(dh_pre.data(), dh_act.data(), h_pre, static_cast<std::size_t>(eh));
      const double y = item.ys[static_cast<std::size_t>(i)];
      for (int e = 0; e < eh; ++e) {
        g_yb1[e] += dh_pre[static_cast<std::size_t>(e)];
        g_yw1[e] += y * dh_pre[static_cast<std::size_t>(e)];
      }
    }
  }
}

}  // namespace

BackwardResult backward(const Parameters& params, const SequenceBatch& batch,
                        double loss_scale) {
  if (batch.items.empty()) throw std::invalid_argument("empty batch");
  BackwardResult result{0.0, Parameters(params.config())};
  SeqCache cache;
  const double item_scale = loss_scale / static_cast<double>(batch.items.size());
  for (const SequenceItem& item : batch.items) {
    forward_item(params, item, cache);
    result.loss += nll_loss(predictions_from_cache(params.config(), cache), item.ys);
    backward_item(params, result.grads, item, cache, item_scale);
  }
  result.loss /= static_cast<double>(batch.items.size());
  return result;
}

// ----------------------------------------------------------------- training

AdamState AdamState::zeros_like(const Parameters& params) {
  AdamState state;
  state.m.reserve(params.tensors().size());
  state.v.reserve(params.tensors().size());
  for (const Tensor& tensor : params.tensors()) {
    Tensor zero{tensor.name, tensor.dims, std::vector<double>(tensor.size(), 0.0)};
    state.m.push_back(zero);
    state.v.push_back(std::move(zero));
  }
  state.step = 0;
  return state;
}

TrainResult train(Parameters& params, const BatchStream& stream,
                  const TrainSchedule& schedule, AdamState* state,
                  int stop_step) {
  AdamState local;
  if (state == nullptr) {
    local = AdamState::zeros_like(params);
    state = &local;
  } else if (state->m.empty() && state->v.empty()) {
    *state = AdamState::zeros_like(params);
  }
  if (state->m.size() != params.tensors().size() ||
      state->v.size() != params.tensors().size()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  constexpr double kPi = 3.14159265358979323846;
  TrainResult result;
  const std::int64_t limit =
      stop_step < 0 ? schedule.steps
                    : std::min<std::int64_t>(schedule.steps, stop_step);
  while (state->step < limit) {
    const int s = static_cast<int>(state->step);
    const SequenceBatch batch = stream(s);
    BackwardResult back = backward(params, batch, 1.0);
    if (!std::isfinite(back.loss)) {
      std::string trace = "loss diverged at step " + std::to_string(s) + "; recent losses:";
      const std::size_t start =
          result.loss_trace.size() > 5 ? result.loss_trace.size() - 5 : 0;
      for (std::size_t i = start; i < result.loss_trace.size(); ++i) {
        trace += " " + std::to_string(result.loss_trace[i]);
      }
      throw DivergenceDetected(trace);
    }
    result.loss_trace.push_back(back.loss);

    // global-norm clip
    double sq = 0.0;
    for (const Tensor& g : back.grads.tensors()) {
      for (double x : g.v) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    const double clip_scale =
        (schedule.clip_norm > 0.0 && norm > schedule.clip_norm)
            ? schedule.clip_norm / norm
            : 1.0;

    // linear warmup then cosine decay to zero
    double lr;
    if (s < schedule.warmup_steps) {
      lr = schedule.base_lr * (s + 1) / static_cast<double>(schedule.warmup_steps);
    } else {
      const double denom =
          std::max(1, schedule.steps - schedule.warmup_steps);
      const double progress = std::min(1.0, (s - schedule.warmup_steps) / denom);
      lr = schedule.base_lr * 0.5 * (1.0 + std::cos(kPi * progress));
    }

    const double t_adam = static_cast<double>(state->step + 1);
    const double corr1 = 1.0 - std::pow(kBeta1, t_adam);
    const double corr2 = 1.0 - std::pow(kBeta2, t_adam);
    for (std::size_t ti = 0; ti < params.tensors().size(); ++ti) {
      double* w = params.tensors()[ti].v.data();
      const double* g = back.grads.tensors()[ti].v.data();
      double* m = state->m[ti].v.data();
      double* v = state->v[ti].v.data();
      const std::size_t size = params.tensors()[ti].size();
      for (std::size_t i = 0; i < size; ++i) {
        const double gi = g[i] * clip_scale;
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
        w[i] -= lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + kEps);
      }
    }
    ++state->step;
  }
  return result;
}

// ------------------------------------------------------ cached prediction

std::vector<Prediction> predict_incontext(const Parameters& params,
                                          const std::vector<Fingerprint>& obs_x,
                                          const std::vector<double>& obs_y,
                                          const std::vector<Fingerprint>& candidates) {
  const ModelConfig& cfg = params.config();
  if (obs_x.size() != obs_y.size() || obs_x.empty()) {
    throw std::invalid_argument("need matching, nonempty observation lists");
  }
  const int m = static_cast<int>(obs_x.size());
  if (m + 1 > cfg.max_pairs) {
    throw CapacityExceeded("observations plus candidate exceed max_pairs " +
                           std::to_string(cfg.max_pairs));
  }
  if (candidates.empty()) return {};
  for (const Fingerprint& fp : candidates) {
    if (fp.nbits != cfg.x_dim) {
      throw std::invalid_argument("fingerprint width does not match model x_dim");
    }
  }
  const int d = cfg.d_model;
  const int eh = cfg.embed_hidden;
  const int ff = cfg.ff_hidden();

  // run the shared observation prefix once; its per-layer keys/values are
  // everything the candidate suffix needs from it
  SequenceItem prefix{obs_x, obs_y};
  SeqCache pc;
  forward_item(params, prefix, pc);
  const int t_p = pc.t_len;
  const int t_cat = t_p + 3;

  std::vector<std::vector<double>> k_cat(static_cast<std::size_t>(cfg.n_layers));
  std::vector<std::vector<double>> v_cat(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    k_cat[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(t_cat) * d, 0.0);
    v_cat[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(t_cat) * d, 0.0);
    std::memcpy(k_cat[static_cast<std::size_t>(l)].data(),
                pc.blocks[static_cast<std::size_t>(l)].k.data(),
                static_cast<std::size_t>(t_p) * d * sizeof(double));
    std::memcpy(v_cat[static_cast<std::size_t>(l)].data(),
                pc.blocks[static_cast<std::size_t>(l)].v.data(),
                static_cast<std::size_t>(t_p) * d * sizeof(double));
  }

  const double* marker_x = params.at("marker_x").v.data();
  const double* marker_y = params.at("marker_y").v.data();
  const double* head_w = params.at("head.w").v.data();
  const double* head_b = params.at("head.b").v.data();
  const std::size_t sd = static_cast<std::size_t>(3) * d;
  std::vector<double> xs(sd), ln1_s(sd), q_s(sd), k_s(sd), v_s(sd);
  std::vector<double> mean3(3), rstd3(3);
  std::vector<double> probs(static_cast<std::size_t>(cfg.n_heads) * 3 * t_cat);
  std::vector<double> att(sd), xmid(sd), ln2_s(sd), ffout(sd);
  std::vector<double> ffpre(static_cast<std::size_t>(3) * ff);
  std::vector<double> ffact(static_cast<std::size_t>(3) * ff);
  std::vector<double> h_pre(static_cast<std::size_t>(eh)), h_act(static_cast<std::size_t>(eh));
  std::vector<double> fln_row(static_cast<std::size_t>(d));
  double fmean = 0.0, frstd = 0.0;

  std::vector<Prediction> out;
  out.reserve(candidates.size());
  for (const Fingerprint& cand : candidates) {
    // suffix tokens: <x>, embed(candidate), <y> at positions t_p..t_p+2
    std::memcpy(xs.data(), marker_x, static_cast<std::size_t>(d) * sizeof(double));
    embed_x(params, cand, h_pre.data(), h_act.data(), xs.data() + d);
    std::memcpy(xs.data() + 2 * d, marker_y, static_cast<std::size_t>(d) * sizeof(double));
    add_pe_row(xs.data(), t_p, d);
    add_pe_row(xs.data() + d, t_p + 1, d);
    add_pe_row(xs.data() + 2 * d, t_p + 2, d);

    for (int l = 0; l < cfg.n_layers; ++l) {
      const ParamView pv = block_view(params, l);
      double* kc = k_cat[static_cast<std::size_t>(l)].data();
      double* vc = v_cat[static_cast<std::size_t>(l)].data();
      t::layernorm_forward(ln1_s.data(), mean3.data(), rstd3.data(), xs.data(),
                           pv.ln1_gain, pv.ln1_bias, 3, d);
      linear(q_s.data(), ln1_s.data(), pv.wq, pv.bq, 3, d, d);
      linear(k_s.data(), ln1_s.data(), pv.wk, pv.bk, 3, d, d);
      linear(v_s.data(), ln1_s.data(), pv.wv, pv.bv, 3, d, d);
      std::memcpy(kc + static_cast<long>(t_p) * d, k_s.data(), sd * sizeof(double));
      std::memcpy(vc + static_cast<long>(t_p) * d, v_s.data(), sd * sizeof(double));
      attention_forward(cfg, q_s.data(), kc, vc, t_cat, t_p, probs.data(), att.data());
      t::matmul_nn(xmid.data(), att.data(), pv.wo, 3, d, d);
      t::add_bias(xmid.data(), pv.bo, 3, d);
      for (std::size_t i = 0; i < sd; ++i) xmid[i] += xs[i];
      t::layernorm_forward(ln2_s.data(), mean3.data(), rstd3.data(), xmid.data(),
                           pv.ln2_gain, pv.ln2_bias, 3, d);
      linear(ffpre.data(), ln2_s.data(), pv.ff_w1, pv.ff_b1, 3, d, ff);
      t::gelu_forward(ffact.data(), ffpre.data(), ffact.size());
      t::matmul_nn(ffout.data(), ffact.data(), pv.ff_w2, 3, ff, d);
      t::add_bias(ffout.data(), pv.ff_b2, 3, d);
      for (std::size_t i = 0; i < sd; ++i) xs[i] = ffout[i] + xmid[i];
    }

    // final layernorm + head on the trailing <y> row only
    t::layernorm_forward(fln_row.data(), &fmean, &frstd, xs.data() + 2 * d,
                         params.at("final_ln.gain").v.data(),
                         params.at("final_ln.bias").v.data(), 1, d);
    double mu = head_b[0];
    double ls = head_b[1];
    for (int j = 0; j < d; ++j) {
      mu += fln_row[static_cast<std::size_t>(j)] * head_w[2 * j];
      ls += fln_row[static_cast<std::size_t>(j)] * head_w[2 * j + 1];
    }
    out.push_back(prediction_from_raw(cfg, mu, ls));
  }
  return out;
}

// --------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[4] = {'L', 'I', 'C', 'B'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

void write_f64(std::ostream& out, double x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!in) throw FormatError("truncated checkpoint");
  return x;
}

double read_f64(std::istream& in) {
  double x = 0;
  in.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!in) throw FormatError("truncated checkpoint");
  return x;
}

void write_tensor_record(std::ostream& out, const std::string& name,
                         const std::vector<int>& dims, const std::vector<double>& v) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (int dim : dims) write_u32(out, static_cast<std::uint32_t>(dim));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const Parameters& params, const std::string& path,
                     const AdamState* adam) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  const ModelConfig& cfg = params.config();
  write_u32(out, static_cast<std::uint32_t>(cfg.d_model));
  write_u32(out, static_cast<std::uint32_t>(cfg.n_layers));
  write_u32(out, static_cast<std::uint32_t>(cfg.n_heads));
  write_u32(out, static_cast<std::uint32_t>(cfg.x_dim));
  write_u32(out, static_cast<std::uint32_t>(cfg.embed_hidden));
  write_u32(out, static_cast<std::uint32_t>(cfg.max_pairs));
  write_f64(out, cfg.logstd_min);
  write_f64(out, cfg.logstd_max);
  for (const Tensor& tensor : params.tensors()) {
    write_tensor_record(out, tensor.name, tensor.dims, tensor.v);
  }
  if (adam != nullptr) {
    write_tensor_record(out, "adam.step", {1},
                        {static_cast<double>(adam->step)});
    for (const Tensor& tensor : adam->m) {
      write_tensor_record(out, "adam.m." + tensor.name, tensor.dims, tensor.v);
    }
    for (const Tensor& tensor : adam->v) {
      write_tensor_record(out, "adam.v." + tensor.name, tensor.dims, tensor.v);
    }
  }
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

Parameters load_checkpoint(const std::string& path, AdamState* adam,
                           const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a model checkpoint: bad magic");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw VersionMismatch("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.d_model = static_cast<int>(read_u32(in));
  cfg.n_layers = static_cast<int>(read_u32(in));
  cfg.n_heads = static_cast<int>(read_u32(in));
  cfg.x_dim = static_cast<int>(read_u32(in));
  cfg.embed_hidden = static_cast<int>(read_u32(in));
  cfg.max_pairs = static_cast<int>(read_u32(in));
  cfg.logstd_min = read_f64(in);
  cfg.logstd_max = read_f64(in);
  if (expected != nullptr && !(cfg == *expected)) {
    throw VersionMismatch("checkpoint model configuration does not match");
  }
  Parameters params = [&] {
    try {
      return Parameters(cfg);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid stored configuration: ") + e.what());
    }
  }();
  AdamState adam_tmp = AdamState::zeros_like(params);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    index.emplace(params.tensors()[i].name, i);
  }
  std::vector<bool> seen(params.tensors().size(), false);

  while (in.peek() != std::char_traits<char>::eof()) {
    const std::uint32_t name_len = read_u32(in);
    if (name_len == 0 || name_len > 256) throw FormatError("bad tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw FormatError("truncated checkpoint");
    const std::uint32_t rank = read_u32(in);
    if (rank > 4) throw FormatError("bad tensor rank");
    std::vector<int> dims(rank);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t dim = read_u32(in);
      if (dim == 0 || dim > (1u << 28)) throw FormatError("bad tensor dimension");
      dims[i] = static_cast<int>(dim);
      count *= dim;
      if (count > (1u << 28)) throw FormatError("tensor too large");
    }
    std::vector<double>* target = nullptr;
    const std::vector<int>* want_dims = nullptr;
    if (name == "adam.step") {
      if (count != 1) throw FormatError("adam.step must be a scalar");
      adam_tmp.step = static_cast<std::int64_t>(read_f64(in));
      continue;
    }
    if (name.rfind("adam.m.", 0) == 0 || name.rfind("adam.v.", 0) == 0) {
      const auto it = index.find(name.substr(7));
      if (it == index.end()) throw FormatError("unknown tensor " + name);
      Tensor& slot = (name[5] == 'm') ? adam_tmp.m[it->second] : adam_tmp.v[it->second];
      target = &slot.v;
      want_dims = &slot.dims;
    } else {
      const auto it = index.find(name);
      if (it == index.end()) throw FormatError("unknown tensor " + name);
      seen[it->second] = true;
      target = &params.tensors()[it->second].v;
      want_dims = &params.tensors()[it->second].dims;
    }
    if (dims != *want_dims) throw FormatError("shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(target->data()),
            static_cast<std::streamsize>(target->size() * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint");
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw FormatError("checkpoint missing tensor " + params.tensors()[i].name);
    }
  }
  if (adam != nullptr) *adam = std::move(adam_tmp);
  return params;
}

}  // namespace molbbo
