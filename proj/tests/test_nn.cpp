#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedphish/embedding.hpp"
#include "fedphish/nn.hpp"
#include "fedphish/rng.hpp"

using namespace fedphish;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.seq_len = 4;
  cfg.input_dim = 2;
  cfg.hidden = 3;
  cfg.bilstm_layers = 3;
  cfg.dense_units = 4;
  return cfg;
}

EmbeddingTable random_table(int vocab, int dim, std::uint64_t seed) {
  EmbeddingTable t;
  t.dim = dim;
  t.vectors = Matrix::Zero(vocab + 2, dim);
  Rng rng(seed);
  for (int w = 1; w <= vocab; ++w) {
    char name[8];
    std::snprintf(name, sizeof(name), "w%d", w);
    t.words.emplace_back(name);
    t.vocab.emplace(name, w);
    for (int d = 0; d < dim; ++d) t.vectors(w, d) = rng.uniform(-0.8, 0.8);
  }
  t.vectors.row(vocab + 1) = t.vectors.middleRows(1, vocab).colwise().mean();
  return t;
}

EncodedSample random_sample(const ModelConfig& cfg, int vocab, int label,
                            std::uint64_t seed) {
  EncodedSample s;
  s.label = label;
  s.true_length = cfg.seq_len;
  Rng rng(seed);
  for (int t = 0; t < cfg.seq_len; ++t)
    s.indices.push_back(1 + static_cast<std::int32_t>(rng.below(vocab)));
  return s;
}

// Scalar transliteration of the five cell equations, independent of the
// Eigen path.
void cell_oracle(const std::vector<double>& x, const std::vector<double>& h,
                 const std::vector<double>& c, const LstmCellParams& p,
                 std::vector<double>& h_out, std::vector<double>& c_out) {
  const auto hn = static_cast<std::size_t>(p.uh.cols());
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  h_out.assign(hn, 0.0);
  c_out.assign(hn, 0.0);
  for (std::size_t k = 0; k < hn; ++k) {
    double pre[4];
    for (int g = 0; g < 4; ++g) {
      double acc = p.b(static_cast<Eigen::Index>(g * hn + k));
      for (std::size_t j = 0; j < x.size(); ++j)
        acc += p.wx(static_cast<Eigen::Index>(g * hn + k),
                    static_cast<Eigen::Index>(j)) * x[j];
      for (std::size_t j = 0; j < hn; ++j)
        acc += p.uh(static_cast<Eigen::Index>(g * hn + k),
                    static_cast<Eigen::Index>(j)) * h[j];
      pre[g] = acc;
    }
    const double gi = sig(pre[0]);
    const double gf = sig(pre[1]);
    const double gg = std::tanh(pre[2]);
    const double go = sig(pre[3]);
    c_out[k] = gf * c[k] + gi * gg;
    h_out[k] = go * std::tanh(c_out[k]);
  }
}

LstmCellParams random_cell(int d_in, int h, std::uint64_t seed) {
  LstmCellParams p;
  Rng rng(seed);
  p.wx = Matrix::Zero(4 * h, d_in);
  p.uh = Matrix::Zero(4 * h, h);
  p.b = Vector::Zero(4 * h);
  for (Eigen::Index r = 0; r < p.wx.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.wx.cols(); ++c)
      p.wx(r, c) = rng.uniform(-0.7, 0.7);
    for (Eigen::Index c = 0; c < p.uh.cols(); ++c)
      p.uh(r, c) = rng.uniform(-0.7, 0.7);
    p.b(r) = rng.uniform(-0.3, 0.3);
  }
  return p;
}

}  // namespace

TEST_CASE("lstm cell: zero everything gives zero state", "[nn]") {
  LstmCellParams p;
  p.wx = Matrix::Zero(8, 2);
  p.uh = Matrix::Zero(8, 2);
  p.b = Vector::Zero(8);
  Vector x = Vector::Zero(2), h = Vector::Zero(2), c = Vector::Zero(2);
  Vector ho, co;
  lstm_cell_step(x, h, c, p, ho, co);
  CHECK(ho.isZero());
  CHECK(co.isZero());
}

TEST_CASE("lstm cell: saturated forget gate preserves cell state", "[nn]") {
  const int hn = 2;
  LstmCellParams p;
  p.wx = Matrix::Zero(4 * hn, 2);
  p.uh = Matrix::Zero(4 * hn, hn);
  p.b = Vector::Zero(4 * hn);
  p.b.segment(hn, hn).setConstant(100.0);  // forget block
  Vector x = Vector::Zero(2), h = Vector::Zero(hn);
  Vector c0(hn);
  c0 << 0.7, -1.3;
  Vector ho, co;
  lstm_cell_step(x, h, c0, p, ho, co);
  CHECK(co(0) == Catch::Approx(0.7).margin(1e-12));
  CHECK(co(1) == Catch::Approx(-1.3).margin(1e-12));
  CHECK(ho(0) == Catch::Approx(0.5 * std::tanh(0.7)).margin(1e-12));
}

TEST_CASE("lstm cell matches the scalar oracle", "[nn]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    LstmCellParams p = random_cell(2, 2, seed);
    Rng rng(seed + 100);
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> h{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> c{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vector xv = Eigen::Map<Vector>(x.data(), 2);
    Vector hv = Eigen::Map<Vector>(h.data(), 2);
    Vector cv = Eigen::Map<Vector>(c.data(), 2);
    Vector ho, co;
    lstm_cell_step(xv, hv, cv, p, ho, co);
    std::vector<double> ho2, co2;
    cell_oracle(x, h, c, p, ho2, co2);
    for (int k = 0; k < 2; ++k) {
      CHECK(ho(k) == Catch::Approx(ho2[static_cast<std::size_t>(k)]).epsilon(1e-12));
      CHECK(co(k) == Catch::Approx(co2[static_cast<std::size_t>(k)]).epsilon(1e-12));
    }
  }
  LstmCellParams p = random_cell(2, 2, 1);
  Vector wrong = Vector::Zero(3);
  Vector h2 = Vector::Zero(2), c2 = Vector::Zero(2), ho, co;
  CHECK_THROWS_AS(lstm_cell_step(wrong, h2, c2, p, ho, co), ShapeMismatch);
}

TEST_CASE("bilstm layer equals an unrolled cell-step oracle", "[nn]") {
  ModelConfig cfg;
  cfg.seq_len = 3;
  cfg.input_dim = 2;
  cfg.hidden = 2;
  cfg.bilstm_layers = 1;
  cfg.dense_units = 2;
  ModelParams params = init_params(cfg, 42);
  Workspace ws(cfg);
  Matrix in(3, 2);
  Rng rng(5);
  for (int t = 0; t < 3; ++t)
    for (int d = 0; d < 2; ++d) in(t, d) = rng.uniform(-1, 1);
  forward(in, params, ws);

  // Forward direction, unrolled by hand.
  Vector h = Vector::Zero(2), c = Vector::Zero(2), hn, cn;
  for (int t = 0; t < 3; ++t) {
    lstm_cell_step(in.row(t).transpose(), h, c, params.cells[0], hn, cn);
    h = hn;
    c = cn;
    for (int k = 0; k < 2; ++k)
      CHECK(ws.layer_out[0](t, k) == Catch::Approx(h(k)).epsilon(1e-12));
  }
  CHECK(ws.last_concat(0) == Catch::Approx(h(0)).epsilon(1e-12));
  // Backward direction consumes the sequence in reverse; its final state
  // (after step 0) feeds the dense layer.
  h.setZero();
  c.setZero();
  for (int t = 2; t >= 0; --t) {
    lstm_cell_step(in.row(t).transpose(), h, c, params.cells[1], hn, cn);
    h = hn;
    c = cn;
    for (int k = 0; k < 2; ++k)
      CHECK(ws.layer_out[0](t, 2 + k) == Catch::Approx(h(k)).epsilon(1e-12));
  }
  CHECK(ws.last_concat(2) == Catch::Approx(h(0)).epsilon(1e-12));
  CHECK(ws.last_concat(3) == Catch::Approx(h(1)).epsilon(1e-12));
}

TEST_CASE("bilstm directions agree on symmetric inputs", "[nn]") {
  ModelConfig cfg;
  cfg.seq_len = 1;
  cfg.input_dim = 2;
  cfg.hidden = 2;
  cfg.bilstm_layers = 1;
  cfg.dense_units = 2;
  ModelParams params = init_params(cfg, 3);
  params.cells[1] = params.cells[0];  // same weights both directions
  Workspace ws(cfg);
  Matrix in(1, 2);
  in << 0.3, -0.8;
  forward(in, params, ws);
  // T = 1: both directions see the same single step.
  CHECK(ws.layer_out[0](0, 0) == Catch::Approx(ws.layer_out[0](0, 2)));
  CHECK(ws.layer_out[0](0, 1) == Catch::Approx(ws.layer_out[0](0, 3)));

  // Palindromic sequence: forward output at t mirrors backward at T-1-t.
  cfg.seq_len = 3;
  ModelParams p3 = init_params(cfg, 4);
  p3.cells[1] = p3.cells[0];
  Workspace ws3(cfg);
  Matrix pal(3, 2);
  pal << 0.5, -0.2, 0.1, 0.9, 0.5, -0.2;
  forward(pal, p3, ws3);
  for (int t = 0; t < 3; ++t)
    for (int k = 0; k < 2; ++k)
      CHECK(ws3.layer_out[0](t, k) ==
            Catch::Approx(ws3.layer_out[0](2 - t, 2 + k)).epsilon(1e-12));
}

TEST_CASE("forward of the all-zero model is exactly 0.5", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams zero = zero_params(cfg);
  Workspace ws(cfg);
  Matrix in = Matrix::Zero(cfg.seq_len, cfg.input_dim);
  CHECK(forward(in, zero, ws) == 0.5);

  ModelParams p = init_params(cfg, 9);
  Rng rng(17);
  for (int t = 0; t < cfg.seq_len; ++t)
    for (int d = 0; d < cfg.input_dim; ++d) in(t, d) = rng.uniform(-2, 2);
  double prob = forward(in, p, ws);
  CHECK(prob > 0.0);
  CHECK(prob < 1.0);
  CHECK(std::isfinite(prob));
}

TEST_CASE("forward matches a composed layer oracle", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 21);
  Workspace ws(cfg);
  Matrix in(cfg.seq_len, cfg.input_dim);
  Rng rng(22);
  for (int t = 0; t < cfg.seq_len; ++t)
    for (int d = 0; d < cfg.input_dim; ++d) in(t, d) = rng.uniform(-1, 1);
  const double prob = forward(in, params, ws);

  // Unroll all three layers with lstm_cell_step, then the dense layers with
  // plain Eigen expressions.
  Matrix current = in;
  Vector final_fwd, final_bwd;
  for (int l = 0; l < cfg.bilstm_layers; ++l) {
    Matrix next(cfg.seq_len, 2 * cfg.hidden);
    Vector h = Vector::Zero(cfg.hidden), c = Vector::Zero(cfg.hidden), hn, cn;
    for (int t = 0; t < cfg.seq_len; ++t) {
      lstm_cell_step(current.row(t).transpose(), h, c,
                     params.cells[static_cast<std::size_t>(l) * 2], hn, cn);
      h = hn;
      c = cn;
      next.row(t).head(cfg.hidden) = h;
    }
    final_fwd = h;
    h.setZero();
    c.setZero();
    for (int t = cfg.seq_len - 1; t >= 0; --t) {
      lstm_cell_step(current.row(t).transpose(), h, c,
                     params.cells[static_cast<std::size_t>(l) * 2 + 1], hn, cn);
      h = hn;
      c = cn;
      next.row(t).tail(cfg.hidden) = h;
    }
    final_bwd = h;
    current = next;
  }
  Vector last(2 * cfg.hidden);
  last << final_fwd, final_bwd;
  Vector dense = (params.dense_w * last + params.dense_b).cwiseMax(0.0);
  const double logit = params.out_w.dot(dense) + params.out_b;
  CHECK(prob == Catch::Approx(sigmoid(logit)).epsilon(1e-12));
}

TEST_CASE("bce_loss analytic values", "[nn]") {
  CHECK(bce_loss(0.5, 1) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(1.0 - 1e-7, 1) == Catch::Approx(0.0).margin(1.1e-7));
  CHECK(bce_loss(0.9, 0) == Catch::Approx(-std::log(0.1)).epsilon(1e-9));
  // Clamp keeps the loss finite at the boundaries.
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  CHECK(std::isfinite(bce_loss(1.0, 0)));
}

TEST_CASE("analytic gradient matches central finite differences", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 31);
  EmbeddingTable table = random_table(9, cfg.input_dim, 32);
  std::vector<EncodedSample> batch{random_sample(cfg, 9, 1, 33),
                                   random_sample(cfg, 9, 0, 34)};
  Workspace ws(cfg);
  ParamVector analytic = batch_gradient(params, batch, table, ws);
  ParamVector numeric = finite_difference_gradient(params, batch, table, 1e-5);
  REQUIRE(analytic.size() == numeric.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({1e-6, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient is ~zero at a perfect prediction", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams params = zero_params(cfg);
  params.out_b = 40.0;  // p = sigmoid(40) = 1 within double precision
  EmbeddingTable table = random_table(5, cfg.input_dim, 50);
  std::vector<EncodedSample> one{random_sample(cfg, 5, 1, 51)};
  Workspace ws(cfg);
  ParamVector grad = batch_gradient(params, one, table, ws);
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  CHECK(std::sqrt(norm) < 1e-8);  // clamp-induced tolerance
}

TEST_CASE("batch gradient of duplicated sample equals single gradient",
          "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 60);
  EmbeddingTable table = random_table(7, cfg.input_dim, 61);
  EncodedSample s = random_sample(cfg, 7, 1, 62);
  Workspace ws(cfg);
  std::vector<EncodedSample> twice{s, s}, once{s};
  ParamVector g2 = batch_gradient(params, twice, table, ws);
  ParamVector g1 = batch_gradient(params, once, table, ws);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g2[i] == Catch::Approx(g1[i]).margin(1e-15));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged", "[nn]") {
  ParamVector theta{1.0, -2.0, 3.0};
  ParamVector grad{0.0, 0.0, 0.0};
  AdamState st(3);
  adam_step(theta, grad, st, 0.01);
  CHECK(st.t == 1);
  CHECK(theta == ParamVector{1.0, -2.0, 3.0});
  CHECK_THROWS_AS(adam_step(theta, ParamVector{1.0}, st, 0.01),
                  LengthMismatch);
}

TEST_CASE("adam: bias-corrected first step", "[nn]") {
  ParamVector theta{0.0, 0.0};
  ParamVector grad{0.3, -4.0};
  AdamState st(2);
  const double lr = 0.001;
  adam_step(theta, grad, st, lr);
  for (int i = 0; i < 2; ++i) {
    const double expected = -lr * grad[static_cast<std::size_t>(i)] /
                            (std::abs(grad[static_cast<std::size_t>(i)]) + st.eps);
    CHECK(theta[static_cast<std::size_t>(i)] ==
          Catch::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("adam: three steps on a quadratic match the hand recurrence",
          "[nn]") {
  // Loss 0.5 * theta^2, so grad = theta. Scalar recurrence iterated by hand.
  double theta_ref = 0.7, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ParamVector theta{0.7};
  AdamState st(1);
  for (int t = 1; t <= 3; ++t) {
    const double g = theta_ref;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta_ref -= lr * mhat / (std::sqrt(vhat) + eps);

    ParamVector grad{theta[0]};
    adam_step(theta, grad, st, lr);
    CHECK(theta[0] == Catch::Approx(theta_ref).epsilon(1e-14));
  }
}

TEST_CASE("flatten/unflatten round-trips exactly", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams p = init_params(cfg, 70);
  ParamVector flat = flatten(p);
  REQUIRE(flat.size() == param_count(cfg));
  ModelParams q = unflatten(cfg, flat);
  ParamVector flat2 = flatten(q);
  CHECK(flat == flat2);  // bit-exact

  flat[5] += 1e-9;
  CHECK(flatten(unflatten(cfg, flat)) == flat);
  CHECK(flatten(unflatten(cfg, flat)) != flat2);

  ParamVector wrong(flat.size() + 1, 0.0);
  CHECK_THROWS_AS(unflatten(cfg, wrong), LengthMismatch);
}

TEST_CASE("parameter count matches the architecture arithmetic", "[nn]") {
  // Full-size network: three BiLSTM layers of 100 units per direction over
  // 100-dim inputs, 200-unit dense layer, single output neuron.
  ModelConfig full;
  const std::size_t layer1 = 2 * (4 * (100 * 100) + 4 * (100 * 100) + 4 * 100);
  const std::size_t layer23 = 2 * (4 * (100 * 200) + 4 * (100 * 100) + 4 * 100);
  const std::size_t dense = 200 * 200 + 200;
  const std::size_t output = 200 + 1;
  CHECK(param_count(full) == layer1 + 2 * layer23 + dense + output);
  CHECK(param_count(full) == 682801);
}

TEST_CASE("init_params is reproducible and shaped as documented", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams a = init_params(cfg, 123);
  ModelParams b = init_params(cfg, 123);
  CHECK(flatten(a) == flatten(b));
  CHECK(flatten(a) != flatten(init_params(cfg, 124)));
  for (const LstmCellParams& cell : a.cells) {
    // Bias layout [i f g o]: forget block exactly 1, everything else 0.
    for (int k = 0; k < cfg.hidden; ++k) {
      CHECK(cell.b(k) == 0.0);
      CHECK(cell.b(cfg.hidden + k) == 1.0);
      CHECK(cell.b(2 * cfg.hidden + k) == 0.0);
      CHECK(cell.b(3 * cfg.hidden + k) == 0.0);
    }
    const double bound = std::sqrt(6.0 / (cell.wx.cols() + cfg.hidden));
    CHECK(cell.wx.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("evaluate thresholds at 0.5", "[nn]") {
  ModelConfig cfg = tiny_config();
  EmbeddingTable table = random_table(5, cfg.input_dim, 80);
  Workspace ws(cfg);
  // Constant-0.5 model predicts the tie as phishing on every sample.
  ModelParams zero = zero_params(cfg);
  std::vector<EncodedSample> balanced;
  for (int i = 0; i < 10; ++i)
    balanced.push_back(random_sample(cfg, 5, i % 2, 81 + static_cast<std::uint64_t>(i)));
  CHECK(evaluate(zero, balanced, table, ws) == 0.5);

  // A model that is always right on an all-phishing set scores 1.0.
  ModelParams sure = zero_params(cfg);
  sure.out_b = 3.0;
  std::vector<EncodedSample> phishing;
  for (int i = 0; i < 7; ++i)
    phishing.push_back(random_sample(cfg, 5, 1, 90 + static_cast<std::uint64_t>(i)));
  CHECK(evaluate(sure, phishing, table, ws) == 1.0);

  CHECK_THROWS_AS(evaluate(zero, {}, table, ws), EmptyDataset);
}

TEST_CASE("random models are a coin flip on balanced data", "[nn]") {
  ModelConfig cfg = tiny_config();
  EmbeddingTable table = random_table(11, cfg.input_dim, 100);
  std::vector<EncodedSample> balanced;
  for (int i = 0; i < 40; ++i)
    balanced.push_back(
        random_sample(cfg, 11, i % 2, 200 + static_cast<std::uint64_t>(i)));
  Workspace ws(cfg);
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    mean += evaluate(init_params(cfg, seed), balanced, table, ws);
  mean /= 10.0;
  CHECK(mean > 0.45);
  CHECK(mean < 0.55);
}

TEST_CASE("a sample's probability is independent of its batch", "[nn]") {
  ModelConfig cfg = tiny_config();
  ModelParams params = init_params(cfg, 110);
  EmbeddingTable table = random_table(6, cfg.input_dim, 111);
  EncodedSample s = random_sample(cfg, 6, 1, 112);
  Workspace ws(cfg);
  Matrix features = embed(s, table);
  const double alone = forward(features, params, ws);
  // Run other samples through the same workspace, then the same sample again.
  for (int i = 0; i < 3; ++i) {
    Matrix other = embed(random_sample(cfg, 6, 0, 113 + static_cast<std::uint64_t>(i)), table);
    forward(other, params, ws);
  }
  CHECK(forward(features, params, ws) == alone);
}

TEST_CASE("full-size architecture runs one forward/backward pass", "[nn]") {
  ModelConfig full;  // paper-scale defaults
  ModelParams params = init_params(full, 7);
  EmbeddingTable table = random_table(50, full.input_dim, 8);
  EncodedSample s;
  s.label = 1;
  s.true_length = 120;
  Rng rng(9);
  for (int t = 0; t < 120; ++t)
    s.indices.push_back(1 + static_cast<std::int32_t>(rng.below(50)));
  for (int t = 120; t < full.seq_len; ++t) s.indices.push_back(kPadIndex);
  Workspace ws(full);
  ModelParams grads = zero_params(full);
  embed_into(s, table, ws.features);
  const double p = forward(ws.features, params, ws);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  backward_into(params, ws, s.label, grads);
  ParamVector flat = flatten(grads);
  CHECK(flat.size() == 682801);
  double norm = 0.0;
  for (double g : flat) norm += g * g;
  CHECK(std::isfinite(norm));
  CHECK(norm > 0.0);
}
