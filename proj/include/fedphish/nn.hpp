#pragma once

// The task model: a stack of BiLSTM layers (first ones returning the full
// sequence, the last returning its final states) feeding a ReLU dense layer
// and a sigmoid output neuron. Forward, exact backpropagation through time,
// binary cross-entropy, Adam, and canonical parameter flattening. All
// arithmetic is double precision with fixed evaluation order, so a fixed seed
// and data order give bit-identical trajectories.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedphish/embedding.hpp"
#include "fedphish/errors.hpp"
#include "fedphish/rng.hpp"

namespace fedphish {

using ParamVector = std::vector<double>;

struct ModelConfig {
  int seq_len = 200;     // time steps fed to the recurrent stack
  int input_dim = 100;   // embedded features per step
  int hidden = 100;      // memory units per direction
  int bilstm_layers = 3;
  int dense_units = 200;

  bool operator==(const ModelConfig&) const = default;

  int layer_input_dim(int layer) const {
    return layer == 0 ? input_dim : 2 * hidden;
  }
};

// One direction of one BiLSTM layer. Gate blocks are stacked row-wise in the
// canonical order input/forget/candidate/output.
struct LstmCellParams {
  Matrix wx;  // 4h x d_in
  Matrix uh;  // 4h x h
  Vector b;   // 4h
};

struct ModelParams {
  ModelConfig cfg;
  std::vector<LstmCellParams> cells;  // layer-major, forward before backward
  Matrix dense_w;                     // dense_units x 2h
  Vector dense_b;
  Vector out_w;  // dense_units
  double out_b = 0.0;
};

inline std::size_t param_count(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (int l = 0; l < cfg.bilstm_layers; ++l) {
    std::size_t d_in = static_cast<std::size_t>(cfg.layer_input_dim(l));
    std::size_t h = static_cast<std::size_t>(cfg.hidden);
    n += 2 * (4 * h * d_in + 4 * h * h + 4 * h);
  }
  n += static_cast<std::size_t>(cfg.dense_units) * 2 * cfg.hidden;
  n += static_cast<std::size_t>(cfg.dense_units);  // dense bias
  n += static_cast<std::size_t>(cfg.dense_units);  // output weights
  n += 1;                                          // output bias
  return n;
}

inline ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams p;
  p.cfg = cfg;
  p.cells.resize(static_cast<std::size_t>(cfg.bilstm_layers) * 2);
  for (int l = 0; l < cfg.bilstm_layers; ++l) {
    int d_in = cfg.layer_input_dim(l);
    for (int dir = 0; dir < 2; ++dir) {
      LstmCellParams& c = p.cells[static_cast<std::size_t>(l) * 2 + dir];
      c.wx = Matrix::Zero(4 * cfg.hidden, d_in);
      c.uh = Matrix::Zero(4 * cfg.hidden, cfg.hidden);
      c.b = Vector::Zero(4 * cfg.hidden);
    }
  }
  p.dense_w = Matrix::Zero(cfg.dense_units, 2 * cfg.hidden);
  p.dense_b = Vector::Zero(cfg.dense_units);
  p.out_w = Vector::Zero(cfg.dense_units);
  p.out_b = 0.0;
  return p;
}

// Glorot-style uniform weights, zero biases except forget-gate biases at 1.0.
// Draw order follows the canonical flatten order, so the result is fully
// reproducible from the seed.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zero_params(cfg);
  Rng rng(seed);
  auto fill = [&rng](Eigen::Ref<Matrix> block, double bound) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c)
        block(r, c) = rng.uniform(-bound, bound);
  };
  const int h = cfg.hidden;
  for (int l = 0; l < cfg.bilstm_layers; ++l) {
    int d_in = cfg.layer_input_dim(l);
    double wb = std::sqrt(6.0 / (d_in + h));
    double ub = std::sqrt(6.0 / (h + h));
    for (int dir = 0; dir < 2; ++dir) {
      LstmCellParams& c = p.cells[static_cast<std::size_t>(l) * 2 + dir];
      for (int g = 0; g < 4; ++g) {
        fill(c.wx.middleRows(g * h, h), wb);
        fill(c.uh.middleRows(g * h, h), ub);
      }
      c.b.segment(h, h).setOnes();  // forget gate
    }
  }
  fill(p.dense_w, std::sqrt(6.0 / (2 * h + cfg.dense_units)));
  Matrix ow(cfg.dense_units, 1);
  fill(ow, std::sqrt(6.0 / (cfg.dense_units + 1)));
  p.out_w = ow.col(0);
  return p;
}

// --- canonical flatten / unflatten -----------------------------------------

// Order: for each layer, forward direction then backward; within a direction,
// gates input/forget/candidate/output, each as W (row-major), U, then b.
// Dense and output layers follow, weights before biases.
namespace detail {

template <class ParamsT, class F>
void visit_blocks(ParamsT& p, F&& f) {
  const int h = p.cfg.hidden;
  for (auto& cell : p.cells) {
    for (int g = 0; g < 4; ++g) {
      f(cell.wx.middleRows(g * h, h));
      f(cell.uh.middleRows(g * h, h));
      f(cell.b.segment(g * h, h));
    }
  }
  f(p.dense_w);
  f(p.dense_b);
  f(p.out_w);
}

}  // namespace detail

inline ParamVector flatten(const ModelParams& p) {
  ParamVector out;
  out.reserve(param_count(p.cfg));
  detail::visit_blocks(p, [&out](auto&& block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (Block::ColsAtCompileTime == 1) {
      for (Eigen::Index i = 0; i < block.size(); ++i) out.push_back(block(i));
    } else {
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
          out.push_back(block(r, c));
    }
  });
  out.push_back(p.out_b);
  return out;
}

inline ModelParams unflatten(const ModelConfig& cfg, const ParamVector& v) {
  if (v.size() != param_count(cfg))
    throw LengthMismatch("parameter vector has " + std::to_string(v.size()) +
                         " values, architecture needs " +
                         std::to_string(param_count(cfg)));
  ModelParams p = zero_params(cfg);
  std::size_t pos = 0;
  detail::visit_blocks(p, [&v, &pos](auto&& block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (Block::ColsAtCompileTime == 1) {
      for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = v[pos++];
    } else {
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = v[pos++];
    }
  });
  p.out_b = v[pos++];
  return p;
}

// --- forward ----------------------------------------------------------------

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Everything the backward pass needs, preallocated once and reused across
// samples.
struct Workspace {
  // per (layer*2 + dir)
  std::vector<Matrix> gates;   // T x 4h, post-activation [i f g o]
  std::vector<Matrix> c_seq;   // T x h
  std::vector<Matrix> tanh_c;  // T x h
  std::vector<Matrix> layer_out;  // per layer: T x 2h
  Vector last_concat;             // 2h
  Vector dense_pre, dense_act;
  double logit = 0.0, p = 0.5;

  // scratch
  Vector pre, hv, cv, tcv, dh, dc, dpre, tmp_h, dlast, ddense;
  Matrix d_out, d_in;
  Matrix features;

  explicit Workspace(const ModelConfig& cfg) {
    const int T = cfg.seq_len, h = cfg.hidden;
    gates.resize(static_cast<std::size_t>(cfg.bilstm_layers) * 2);
    c_seq.resize(gates.size());
    tanh_c.resize(gates.size());
    layer_out.resize(static_cast<std::size_t>(cfg.bilstm_layers));
    for (int l = 0; l < cfg.bilstm_layers; ++l) {
      for (int dir = 0; dir < 2; ++dir) {
        auto idx = static_cast<std::size_t>(l) * 2 + dir;
        gates[idx] = Matrix::Zero(T, 4 * h);
        c_seq[idx] = Matrix::Zero(T, h);
        tanh_c[idx] = Matrix::Zero(T, h);
      }
      layer_out[static_cast<std::size_t>(l)] = Matrix::Zero(T, 2 * h);
    }
    last_concat = Vector::Zero(2 * h);
    dense_pre = Vector::Zero(cfg.dense_units);
    dense_act = Vector::Zero(cfg.dense_units);
    pre = Vector::Zero(4 * h);
    hv = Vector::Zero(h);
    cv = Vector::Zero(h);
    tcv = Vector::Zero(h);
    dh = Vector::Zero(h);
    dc = Vector::Zero(h);
    dpre = Vector::Zero(4 * h);
    tmp_h = Vector::Zero(h);
    dlast = Vector::Zero(2 * h);
    ddense = Vector::Zero(cfg.dense_units);
    d_out = Matrix::Zero(T, 2 * h);
    d_in = Matrix::Zero(T, std::max(cfg.input_dim, 2 * h));
    features = Matrix::Zero(T, cfg.input_dim);
  }
};

// Single LSTM step; the free-function form mirrors the textbook equations and
// is what the layer loop and the unit oracles both call.
inline void lstm_cell_step(const Eigen::Ref<const Vector>& x,
                           const Eigen::Ref<const Vector>& h_prev,
                           const Eigen::Ref<const Vector>& c_prev,
                           const LstmCellParams& p, Vector& h_out,
                           Vector& c_out) {
  const auto hn = p.uh.cols();
  if (x.size() != p.wx.cols() || h_prev.size() != hn || c_prev.size() != hn)
    throw ShapeMismatch("lstm_cell_step input shapes");
  Vector pre = p.wx * x + p.uh * h_prev + p.b;
  Vector gi = pre.segment(0, hn).unaryExpr([](double v) { return sigmoid(v); });
  Vector gf = pre.segment(hn, hn).unaryExpr([](double v) { return sigmoid(v); });
  Vector gg = pre.segment(2 * hn, hn).array().tanh();
  Vector go =
      pre.segment(3 * hn, hn).unaryExpr([](double v) { return sigmoid(v); });
  c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
  h_out = go.cwiseProduct(c_out.array().tanh().matrix());
}

namespace detail {

// Runs one direction of one layer over the cached input, filling the gate,
// cell, and hidden caches in step order.
inline void run_direction(const Matrix& in, const LstmCellParams& cp, int dir,
                          int T, int h, Matrix& gates, Matrix& c_seq,
                          Matrix& tanh_c, Matrix& out, Workspace& ws) {
  ws.hv.setZero();
  ws.cv.setZero();
  const int first = dir == 0 ? 0 : T - 1;
  const int step = dir == 0 ? 1 : -1;
  for (int n = 0, t = first; n < T; ++n, t += step) {
    ws.pre.noalias() = cp.wx * in.row(t).transpose();
    ws.pre.noalias() += cp.uh * ws.hv;
    ws.pre += cp.b;
    auto g = gates.row(t);
    for (int k = 0; k < h; ++k) {
      g(k) = sigmoid(ws.pre(k));                     // input
      g(h + k) = sigmoid(ws.pre(h + k));             // forget
      g(2 * h + k) = std::tanh(ws.pre(2 * h + k));   // candidate
      g(3 * h + k) = sigmoid(ws.pre(3 * h + k));     // output
    }
    for (int k = 0; k < h; ++k) {
      double c = g(h + k) * ws.cv(k) + g(k) * g(2 * h + k);
      double tc = std::tanh(c);
      ws.cv(k) = c;
      c_seq(t, k) = c;
      tanh_c(t, k) = tc;
      double hv = g(3 * h + k) * tc;
      ws.hv(k) = hv;
      out(t, dir * h + k) = hv;
    }
  }
}

}  // namespace detail

// Forward pass for one sample. Returns the phishing probability and leaves
// all intermediates in the workspace for backward().
inline double forward(const Matrix& features, const ModelParams& p,
                      Workspace& ws) {
  const ModelConfig& cfg = p.cfg;
  const int T = cfg.seq_len, h = cfg.hidden;
  if (features.rows() != T || features.cols() != cfg.input_dim)
    throw ShapeMismatch("features must be seq_len x input_dim");
  for (int l = 0; l < cfg.bilstm_layers; ++l) {
    const Matrix& in = l == 0 ? features : ws.layer_out[l - 1];
    for (int dir = 0; dir < 2; ++dir) {
      auto idx = static_cast<std::size_t>(l) * 2 + dir;
      detail::run_direction(in, p.cells[idx], dir, T, h, ws.gates[idx],
                            ws.c_seq[idx], ws.tanh_c[idx], ws.layer_out[l], ws);
    }
  }
  // Final states: forward direction after step T-1, backward after step 0.
  const Matrix& top = ws.layer_out[cfg.bilstm_layers - 1];
  ws.last_concat.head(h) = top.row(T - 1).head(h);
  ws.last_concat.tail(h) = top.row(0).tail(h);
  ws.dense_pre.noalias() = p.dense_w * ws.last_concat;
  ws.dense_pre += p.dense_b;
  ws.dense_act = ws.dense_pre.cwiseMax(0.0);
  ws.logit = p.out_w.dot(ws.dense_act) + p.out_b;
  ws.p = sigmoid(ws.logit);
  return ws.p;
}

constexpr double kProbClamp = 1e-7;

// -[y ln p + (1-y) ln(1-p)], with p clamped away from {0,1} before the logs.
inline double bce_loss(double p, int y) {
  double q = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
  return -(y * std::log(q) + (1 - y) * std::log(1.0 - q));
}

// Exact gradient of the (unclamped) loss for the sample whose forward pass is
// cached in ws, accumulated into `grads` (same structure as the model).
// d loss / d logit = p - y; when p sits inside the clamp window this equals
// the clamped loss's gradient, and at the clamp edge it differs by at most
// kProbClamp.
inline void backward_into(const ModelParams& p, Workspace& ws, int y,
                          ModelParams& grads) {
  const ModelConfig& cfg = p.cfg;
  const int T = cfg.seq_len, h = cfg.hidden;
  const double dlogit = ws.p - static_cast<double>(y);
  grads.out_w.noalias() += ws.dense_act * dlogit;
  grads.out_b += dlogit;
  ws.ddense = p.out_w * dlogit;
  for (int k = 0; k < cfg.dense_units; ++k)
    if (ws.dense_pre(k) <= 0.0) ws.ddense(k) = 0.0;
  grads.dense_w.noalias() += ws.ddense * ws.last_concat.transpose();
  grads.dense_b += ws.ddense;
  ws.dlast.noalias() = p.dense_w.transpose() * ws.ddense;

  // Seed the top layer's output gradient at the two final-state positions.
  ws.d_out.setZero();
  ws.d_out.row(T - 1).head(h) = ws.dlast.head(h);
  ws.d_out.row(0).tail(h) = ws.dlast.tail(h);

  for (int l = cfg.bilstm_layers - 1; l >= 0; --l) {
    const int d_in = cfg.layer_input_dim(l);
    const Matrix& in = l == 0 ? ws.features : ws.layer_out[l - 1];
    ws.d_in.topLeftCorner(T, d_in).setZero();
    for (int dir = 0; dir < 2; ++dir) {
      auto idx = static_cast<std::size_t>(l) * 2 + dir;
      const LstmCellParams& cp = p.cells[idx];
      LstmCellParams& gc = grads.cells[idx];
      const Matrix& gates = ws.gates[idx];
      const Matrix& c_seq = ws.c_seq[idx];
      const Matrix& tanh_c = ws.tanh_c[idx];
      const int first = dir == 0 ? 0 : T - 1;
      const int step = dir == 0 ? 1 : -1;
      const int last = dir == 0 ? T - 1 : 0;
      ws.dh.setZero();  // carry into earlier consumption steps
      ws.dc.setZero();
      for (int n = 0, t = last; n < T; ++n, t -= step) {
        ws.dh += ws.d_out.row(t).segment(dir * h, h).transpose();
        const bool has_prev = t != first;
        for (int k = 0; k < h; ++k) {
          const double gi = gates(t, k);
          const double gf = gates(t, h + k);
          const double gg = gates(t, 2 * h + k);
          const double go = gates(t, 3 * h + k);
          const double tc = tanh_c(t, k);
          const double c_prev = has_prev ? c_seq(t - step, k) : 0.0;
          const double dh = ws.dh(k);
          const double dc = dh * go * (1.0 - tc * tc) + ws.dc(k);
          ws.dpre(k) = dc * gg * gi * (1.0 - gi);
          ws.dpre(h + k) = dc * c_prev * gf * (1.0 - gf);
          ws.dpre(2 * h + k) = dc * gi * (1.0 - gg * gg);
          ws.dpre(3 * h + k) = dh * tc * go * (1.0 - go);
          ws.dc(k) = dc * gf;
        }
        gc.wx.noalias() += ws.dpre * in.row(t);
        if (has_prev) {
          gc.uh.noalias() +=
              ws.dpre * ws.layer_out[l].row(t - step).segment(dir * h, h);
        }
        gc.b += ws.dpre;
        ws.d_in.row(t).head(d_in).noalias() +=
            (cp.wx.transpose() * ws.dpre).transpose();
        ws.dh.noalias() = cp.uh.transpose() * ws.dpre;
      }
    }
    if (l > 0) ws.d_out = ws.d_in.leftCols(2 * h);
  }
}

inline void scale_params(ModelParams& p, double s) {
  for (auto& c : p.cells) {
    c.wx *= s;
    c.uh *= s;
    c.b *= s;
  }
  p.dense_w *= s;
  p.dense_b *= s;
  p.out_w *= s;
  p.out_b *= s;
}

// --- Adam -------------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(ParamVector& params, const ParamVector& grad,
                      AdamState& st, double lr) {
  if (params.size() != grad.size() || params.size() != st.m.size())
    throw LengthMismatch("adam_step length mismatch");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

// --- evaluation and gradient checking ---------------------------------------

inline double evaluate(const ModelParams& p,
                       std::span<const EncodedSample> samples,
                       const EmbeddingTable& table, Workspace& ws) {
  if (samples.empty()) throw EmptyDataset("evaluate on empty dataset");
  long correct = 0;
  for (const EncodedSample& s : samples) {
    embed_into(s, table, ws.features);
    double prob = forward(ws.features, p, ws);
    int pred = prob >= 0.5 ? 1 : 0;
    if (pred == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

inline double mean_loss(const ModelParams& p,
                        std::span<const EncodedSample> samples,
                        const EmbeddingTable& table, Workspace& ws) {
  if (samples.empty()) throw EmptyDataset("mean_loss on empty dataset");
  double total = 0.0;
  for (const EncodedSample& s : samples) {
    embed_into(s, table, ws.features);
    total += bce_loss(forward(ws.features, p, ws), s.label);
  }
  return total / static_cast<double>(samples.size());
}

// Mean analytic batch gradient, flattened in canonical order.
inline ParamVector batch_gradient(const ModelParams& p,
                                  std::span<const EncodedSample> samples,
                                  const EmbeddingTable& table, Workspace& ws,
                                  double* loss_out = nullptr) {
  ModelParams grads = zero_params(p.cfg);
  double loss = 0.0;
  for (const EncodedSample& s : samples) {
    embed_into(s, table, ws.features);
    loss += bce_loss(forward(ws.features, p, ws), s.label);
    backward_into(p, ws, s.label, grads);
  }
  scale_params(grads, 1.0 / static_cast<double>(samples.size()));
  if (loss_out) *loss_out = loss / static_cast<double>(samples.size());
  return flatten(grads);
}

// Central finite differences over every coordinate. Independent of the
// backward pass: only forward() and bce_loss() are exercised.
inline ParamVector finite_difference_gradient(
    const ModelParams& p, std::span<const EncodedSample> samples,
    const EmbeddingTable& table, double step = 1e-5) {
  ParamVector theta = flatten(p);
  ParamVector grad(theta.size(), 0.0);
  Workspace ws(p.cfg);
  auto loss_at = [&](const ParamVector& v) {
    ModelParams m = unflatten(p.cfg, v);
    double total = 0.0;
    for (const EncodedSample& s : samples) {
      embed_into(s, table, ws.features);
      total += bce_loss(forward(ws.features, m, ws), s.label);
    }
    return total / static_cast<double>(samples.size());
  };
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double up = loss_at(theta);
    theta[i] = orig - step;
    const double down = loss_at(theta);
    theta[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace fedphish
