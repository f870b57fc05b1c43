#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedphish/fed.hpp"
#include "fedphish/rng.hpp"

using namespace fedphish;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.seq_len = 12;
  cfg.input_dim = 4;
  cfg.hidden = 4;
  cfg.bilstm_layers = 3;
  cfg.dense_units = 8;
  return cfg;
}

// Two-word vocabulary with opposite vectors: class 1 speaks word 1, class 0
// speaks word 2. Linearly separable by construction.
EmbeddingTable separable_table(int dim) {
  EmbeddingTable t;
  t.dim = dim;
  t.words = {"good", "evil"};
  t.vocab = {{"good", 1}, {"evil", 2}};
  t.vectors = Matrix::Zero(4, dim);
  for (int d = 0; d < dim; ++d) {
    t.vectors(1, d) = 0.6;
    t.vectors(2, d) = -0.6;
    t.vectors(3, d) = 0.0;
  }
  return t;
}

std::vector<EncodedSample> separable_samples(const ModelConfig& cfg, int n,
                                             std::uint64_t seed) {
  std::vector<EncodedSample> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    EncodedSample s;
    s.label = i % 2;
    s.true_length = cfg.seq_len;
    for (int t = 0; t < cfg.seq_len; ++t) {
      // mostly the class word, occasionally the other
      const bool flip = rng.uniform() < 0.1;
      const int word = (s.label == 1) == !flip ? 1 : 2;
      s.indices.push_back(word);
    }
    s.source_id = "s" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

ClientDataset client_of(std::vector<EncodedSample> samples, int id) {
  ClientDataset c;
  c.client_id = id;
  int p = 0;
  for (const auto& s : samples) p += s.label;
  c.phishing_fraction =
      samples.empty() ? 0.0
                      : static_cast<double>(p) / static_cast<double>(samples.size());
  c.samples = std::move(samples);
  return c;
}

}  // namespace

TEST_CASE("select_clients draws distinct ids uniformly", "[fed]") {
  Rng rng(1);
  std::vector<int> ids = select_clients(10, 3, rng);
  REQUIRE(ids.size() == 3);
  CHECK(std::is_sorted(ids.begin(), ids.end()));
  for (int id : ids) {
    CHECK(id >= 0);
    CHECK(id < 10);
  }
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());

  Rng all_rng(2);
  std::vector<int> all = select_clients(5, 5, all_rng);
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});

  Rng a(7), b(7);
  CHECK(select_clients(50, 15, a) == select_clients(50, 15, b));

  Rng bad(3);
  CHECK_THROWS_AS(select_clients(5, 6, bad), InvalidSelection);
  CHECK_THROWS_AS(select_clients(5, 0, bad), InvalidSelection);
}

TEST_CASE("fedavg aggregation algebra", "[fed]") {
  ParamVector global{10.0, -2.0};

  SECTION("zero deltas leave the global model bit-identical") {
    std::vector<LocalUpdate> updates(3);
    for (int i = 0; i < 3; ++i) {
      updates[static_cast<std::size_t>(i)].client_id = i;
      updates[static_cast<std::size_t>(i)].delta = {0.0, 0.0};
      updates[static_cast<std::size_t>(i)].n_k = i + 1;
    }
    CHECK(fedavg_aggregate(global, updates) == global);
  }

  SECTION("single client moves the global model by its whole delta") {
    LocalUpdate u{0, {1.5, -0.25}, 37, 0.0};
    ParamVector next = fedavg_aggregate(global, {u});
    CHECK(next[0] == 11.5);
    CHECK(next[1] == -2.25);
  }

  SECTION("equal sample counts average the deltas") {
    LocalUpdate a{0, {2.0, 0.0}, 5, 0.0};
    LocalUpdate b{1, {0.0, 4.0}, 5, 0.0};
    ParamVector next = fedavg_aggregate(global, {a, b});
    CHECK(next[0] == Catch::Approx(11.0));
    CHECK(next[1] == Catch::Approx(0.0));
  }

  SECTION("hand-evaluated three-client weighted example is exact") {
    // n = (1, 2, 3), scalar deltas (6, 0, -6):
    // G + (1*6 + 2*0 + 3*(-6)) / 6 = G - 2, exact in double arithmetic.
    ParamVector g{10.0};
    LocalUpdate a{0, {6.0}, 1, 0.0};
    LocalUpdate b{1, {0.0}, 2, 0.0};
    LocalUpdate c{2, {-6.0}, 3, 0.0};
    ParamVector next = fedavg_aggregate(g, {a, b, c});
    CHECK(next[0] == 8.0);
  }

  SECTION("weights are scale invariant") {
    LocalUpdate a{0, {0.3, 0.7}, 1, 0.0};
    LocalUpdate b{1, {-0.2, 0.1}, 2, 0.0};
    LocalUpdate c{2, {0.05, -0.4}, 3, 0.0};
    ParamVector base = fedavg_aggregate(global, {a, b, c});
    for (auto* u : {&a, &b, &c}) u->n_k *= 7;
    CHECK(fedavg_aggregate(global, {a, b, c}) == base);
  }

  SECTION("errors") {
    CHECK_THROWS_AS(fedavg_aggregate(global, {}), EmptyUpdateSet);
    LocalUpdate bad{0, {1.0}, 1, 0.0};
    CHECK_THROWS_AS(fedavg_aggregate(global, {bad}), LengthMismatch);
  }
}

TEST_CASE("local_train fixed points", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  ClientDataset client = client_of(separable_samples(cfg, 8, 3), 0);
  ParamVector global = flatten(init_params(cfg, 5));
  TrainConfig tc;
  tc.batch = 4;

  TrainConfig zero_lr = tc;
  zero_lr.lr = 0.0;
  LocalUpdate u1 = local_train(client, global, cfg, table, zero_lr, 5, 0);
  CHECK(u1.n_k == 8);
  for (double d : u1.delta) CHECK(d == 0.0);

  TrainConfig zero_epochs = tc;
  zero_epochs.local_epochs = 0;
  LocalUpdate u2 = local_train(client, global, cfg, table, zero_epochs, 5, 0);
  for (double d : u2.delta) CHECK(d == 0.0);

  ClientDataset empty = client_of({}, 1);
  CHECK_THROWS_AS(local_train(empty, global, cfg, table, tc, 5, 0),
                  EmptyClient);
}

TEST_CASE("one-sample local step equals a hand-composed adam step", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> one = separable_samples(cfg, 1, 9);
  ClientDataset client = client_of(one, 4);
  ParamVector global = flatten(init_params(cfg, 6));
  TrainConfig tc;
  tc.lr = 1e-3;

  LocalUpdate update = local_train(client, global, cfg, table, tc, 11, 2);

  // Replay: one batch of one sample, fresh Adam state.
  ModelParams params = unflatten(cfg, global);
  Workspace ws(cfg);
  ParamVector grad = batch_gradient(params, one, table, ws);
  ParamVector theta = global;
  AdamState adam(theta.size());
  adam_step(theta, grad, adam, tc.lr);
  REQUIRE(update.delta.size() == theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    CHECK(update.delta[i] == theta[i] - global[i]);
}

TEST_CASE("run_round with identical clients keeps them in agreement", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> shared = separable_samples(cfg, 10, 21);
  std::vector<EncodedSample> test = separable_samples(cfg, 6, 22);
  // Same data and same client_id: every delta is computed from identical
  // inputs and identical RNG streams.
  std::vector<ClientDataset> clients{client_of(shared, 0),
                                     client_of(shared, 0),
                                     client_of(shared, 0)};
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch = 4;
  ServerState server(cfg, 33);
  ParamVector before = server.global;
  Workspace ws(cfg);

  LocalUpdate expected =
      local_train(clients[0], before, cfg, table, tc, server.seed, 0);
  RoundRecord rec = run_round(server, clients, 3, test, table, tc, ws);
  CHECK(rec.round == 0);
  CHECK(rec.selected == std::vector<int>{0, 1, 2});
  CHECK(server.round == 1);
  REQUIRE(server.global.size() == before.size());
  for (std::size_t i = 0; i < server.global.size(); ++i)
    CHECK(server.global[i] ==
          Catch::Approx(before[i] + expected.delta[i]).margin(1e-12));
}

TEST_CASE("zero local epochs make rounds a fixed point", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<ClientDataset> clients{
      client_of(separable_samples(cfg, 8, 1), 0),
      client_of(separable_samples(cfg, 8, 2), 1)};
  std::vector<EncodedSample> test = separable_samples(cfg, 4, 3);
  TrainConfig tc;
  tc.local_epochs = 0;
  ServerState server(cfg, 8);
  ParamVector before = server.global;
  Workspace ws(cfg);
  RoundRecord rec = run_round(server, clients, 2, test, table, tc, ws);
  CHECK(server.global == before);
  CHECK(rec.accuracy >= 0.0);
}

TEST_CASE("early stopping patience semantics", "[fed]") {
  SECTION("strictly decreasing then flat stops after patience epochs") {
    EarlyStopper stopper(10);
    int epoch = 0;
    bool stopped = false;
    // 5 improving epochs, then flat forever.
    for (; epoch < 100 && !stopped; ++epoch) {
      double v = epoch < 5 ? 1.0 - 0.1 * epoch : 0.6;
      stopped = stopper.observe(v);
    }
    CHECK(epoch == 15);  // stopped at E + patience = 5 + 10
  }
  SECTION("patience zero stops at the first non-improving epoch") {
    EarlyStopper stopper(0);
    CHECK_FALSE(stopper.observe(1.0));
    CHECK(stopper.observe(1.0));
  }
  SECTION("improvement resets the counter") {
    EarlyStopper stopper(2);
    CHECK_FALSE(stopper.observe(1.0));
    CHECK_FALSE(stopper.observe(1.0));   // since = 1
    CHECK_FALSE(stopper.observe(0.5));   // reset
    CHECK_FALSE(stopper.observe(0.6));
    CHECK(stopper.observe(0.6));         // since = 2
  }
}

TEST_CASE("centralized training nails a separable toy corpus", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> train = separable_samples(cfg, 40, 100);
  std::vector<EncodedSample> test = separable_samples(cfg, 20, 200);
  TrainConfig tc;
  tc.lr = 0.02;
  tc.batch = 8;
  tc.patience = 5;
  tc.validation_fraction = 0.2;
  tc.max_epochs = 60;
  FitResult fit = train_centralized(train, test, table, cfg, tc, 1);
  CHECK(fit.test_accuracy >= 0.95);
  CHECK(fit.epochs_run <= 60);
  CHECK(fit.history.size() == static_cast<std::size_t>(fit.epochs_run));
}

TEST_CASE("standalone with the full train set equals centralized", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> train = separable_samples(cfg, 24, 300);
  std::vector<EncodedSample> test = separable_samples(cfg, 10, 301);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch = 8;
  tc.max_epochs = 6;
  tc.validation_fraction = 0.1;
  ClientDataset whole = client_of(train, 0);
  FitResult standalone = train_standalone(whole, test, table, cfg, tc, 77);
  FitResult centralized = train_centralized(train, test, table, cfg, tc, 77);
  CHECK(flatten(standalone.model) == flatten(centralized.model));
  CHECK(standalone.test_accuracy == centralized.test_accuracy);
}

TEST_CASE("single-class client generalizes no better than the prior", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> train = separable_samples(cfg, 30, 400);
  std::vector<EncodedSample> phishing_only;
  for (const auto& s : train)
    if (s.label == 1) phishing_only.push_back(s);
  std::vector<EncodedSample> test = separable_samples(cfg, 20, 401);
  TrainConfig tc;
  tc.lr = 0.02;
  tc.batch = 4;
  tc.max_epochs = 20;
  tc.validation_fraction = 0.1;
  FitResult fit = train_standalone(client_of(phishing_only, 0), test, table,
                                   cfg, tc, 5);
  CHECK(fit.test_accuracy <= 0.55);  // balanced test: majority prior + slack
}

TEST_CASE("K=1 federated retraces the centralized trajectory", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> train = separable_samples(cfg, 20, 500);
  std::vector<EncodedSample> test = separable_samples(cfg, 8, 501);
  const std::uint64_t seed = 99;
  const int rounds = 5;

  TrainConfig tc;
  tc.lr = 5e-3;
  tc.batch = 8;

  // Federated side: one client holding the whole train set.
  std::vector<ClientDataset> clients = partition_iid(train, 1, seed);
  ServerState server(cfg, seed);
  Workspace ws(cfg);
  std::vector<std::uint64_t> fed_hashes;
  for (int r = 0; r < rounds; ++r) {
    run_round(server, clients, 1, test, table, tc, ws);
    fed_hashes.push_back(fnv1a(server.global));
  }

  // Centralized side: no validation split, same epoch count.
  TrainConfig ctc = tc;
  ctc.validation_fraction = 0.0;
  ctc.max_epochs = rounds;
  std::vector<std::uint64_t> central_hashes;
  train_centralized(train, test, table, cfg, ctc, seed,
                    [&](int, const ParamVector& params) {
                      central_hashes.push_back(fnv1a(params));
                    });
  REQUIRE(central_hashes.size() == fed_hashes.size());
  for (std::size_t i = 0; i < fed_hashes.size(); ++i) {
    INFO("round " << i);
    CHECK(fed_hashes[i] == central_hashes[i]);
  }
}

TEST_CASE("training is bit-deterministic across runs", "[fed]") {
  ModelConfig cfg = small_config();
  EmbeddingTable table = separable_table(cfg.input_dim);
  std::vector<EncodedSample> train = separable_samples(cfg, 16, 600);
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch = 4;
  auto run_once = [&] {
    ModelParams params = init_params(cfg, 10);
    Workspace ws(cfg);
    ModelParams grads = zero_params(cfg);
    Rng order(77);
    AdamState adam(param_count(cfg));
    for (int e = 0; e < 3; ++e)
      train_one_epoch(params, train, table, tc, order, adam, ws, grads);
    return flatten(params);
  };
  CHECK(run_once() == run_once());
}
