#pragma once

// The federated learning loop: parameter-server state, uniform client
// selection, local training, FedAvg aggregation, and the centralized /
// standalone baselines trained with the same machinery.
//
// Determinism contract: every shuffle stream is derived from
// (experiment seed, participant id, round), local updates are computed from
// an immutable copy of the global model, and aggregation always sums in
// ascending client-id order. Selected clients could therefore train in
// parallel without changing a single bit of the result; this implementation
// runs them sequentially.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fedphish/embedding.hpp"
#include "fedphish/errors.hpp"
#include "fedphish/nn.hpp"
#include "fedphish/partition.hpp"
#include "fedphish/rng.hpp"

namespace fedphish {

struct TrainConfig {
  double lr = 1e-4;
  int batch = 16;
  int local_epochs = 1;
  int patience = 10;
  double validation_fraction = 0.1;  // centralized/standalone early stopping
  int max_epochs = 100;              // hard cap for the epoch loop
  bool clip_gradients = false;       // divergence debugging only
  double clip_norm = 5.0;
};

struct LocalUpdate {
  int client_id = 0;
  ParamVector delta;  // trained local model minus the global it started from
  long n_k = 0;
  double mean_loss = 0.0;
  // Per-coordinate rounding residual of the delta subtraction,
  // L - (G + delta). Carrying it makes aggregation reproduce a weight-1.0
  // client's trained model bit-exactly; empty means all zero.
  ParamVector residual;
};

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  double accuracy = 0.0;   // global model on the test set
  double mean_loss = 0.0;  // mean local (or epoch) training loss
};

struct ServerState {
  ModelConfig arch;
  ParamVector global;
  int round = 0;
  std::uint64_t seed = 0;
  Rng selection_rng;
  std::vector<RoundRecord> history;

  ServerState(const ModelConfig& a, std::uint64_t experiment_seed)
      : arch(a),
        global(flatten(init_params(a, derive_seed(experiment_seed,
                                                  Stream::ModelInit)))),
        seed(experiment_seed),
        selection_rng(derive_rng(experiment_seed, Stream::Selection)) {}
};

// Uniform sample of exactly k_selected distinct ids out of [0, clients),
// returned in ascending order.
inline std::vector<int> select_clients(int clients, int k_selected, Rng& rng) {
  if (k_selected < 1 || k_selected > clients)
    throw InvalidSelection("need 1 <= K_selected <= K");
  std::vector<int> ids(static_cast<std::size_t>(clients));
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < k_selected; ++i) {
    auto j = static_cast<std::size_t>(i) +
             static_cast<std::size_t>(rng.below(
                 static_cast<std::uint64_t>(clients - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(k_selected));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline void zero_grads(ModelParams& g) {
  for (auto& c : g.cells) {
    c.wx.setZero();
    c.uh.setZero();
    c.b.setZero();
  }
  g.dense_w.setZero();
  g.dense_b.setZero();
  g.out_w.setZero();
  g.out_b = 0.0;
}

// One pass over the data in a fresh shuffled order: mean-of-sample gradients
// per batch, one Adam step per batch (trailing partial batch included).
// Returns the mean training loss over all samples seen.
inline double train_one_epoch(ModelParams& params,
                              std::span<const EncodedSample> data,
                              const EmbeddingTable& table,
                              const TrainConfig& cfg, Rng& order_rng,
                              AdamState& adam, Workspace& ws,
                              ModelParams& grads) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order);
  double loss_total = 0.0;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const std::size_t batch_end =
        std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch));
    const auto batch_n = static_cast<double>(batch_end - pos);
    zero_grads(grads);
    for (std::size_t i = pos; i < batch_end; ++i) {
      const EncodedSample& s = data[order[i]];
      embed_into(s, table, ws.features);
      loss_total += bce_loss(forward(ws.features, params, ws), s.label);
      backward_into(params, ws, s.label, grads);
    }
    scale_params(grads, 1.0 / batch_n);
    ParamVector flat_grad = flatten(grads);
    if (cfg.clip_gradients) {
      double sq = 0.0;
      for (double g : flat_grad) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > cfg.clip_norm)
        for (double& g : flat_grad) g *= cfg.clip_norm / norm;
    }
    ParamVector theta = flatten(params);
    adam_step(theta, flat_grad, adam, cfg.lr);
    params = unflatten(params.cfg, theta);
    pos = batch_end;
  }
  return loss_total / static_cast<double>(data.size());
}

// Local training for one selected client: copy the global model, run
// cfg.local_epochs shuffled passes with a fresh Adam state (optimizer state
// is never federated), and return the parameter delta with the local sample
// count.
inline LocalUpdate local_train(const ClientDataset& client,
                               const ParamVector& global,
                               const ModelConfig& arch,
                               const EmbeddingTable& table,
                               const TrainConfig& cfg, std::uint64_t seed,
                               int round) {
  if (client.samples.empty()) throw EmptyClient("client has no samples");
  ModelParams params = unflatten(arch, global);
  Workspace ws(arch);
  ModelParams grads = zero_params(arch);
  Rng order_rng = derive_rng(seed, Stream::Shuffle,
                             static_cast<std::uint64_t>(client.client_id),
                             static_cast<std::uint64_t>(round));
  AdamState adam(global.size());
  double loss_sum = 0.0;
  for (int e = 0; e < cfg.local_epochs; ++e)
    loss_sum += train_one_epoch(params, client.samples, table, cfg, order_rng,
                                adam, ws, grads);
  LocalUpdate update;
  update.client_id = client.client_id;
  update.n_k = static_cast<long>(client.samples.size());
  update.mean_loss =
      cfg.local_epochs > 0 ? loss_sum / cfg.local_epochs : 0.0;
  ParamVector trained = flatten(params);
  update.delta.resize(global.size());
  update.residual.resize(global.size());
  for (std::size_t i = 0; i < global.size(); ++i) {
    update.delta[i] = trained[i] - global[i];
    update.residual[i] = trained[i] - (global[i] + update.delta[i]);
  }
  return update;
}

// G_{t+1} = G_t + sum_k (n_k / n_total) * delta_k, summed in the order given
// (callers pass ascending client id for bit-reproducibility).
inline ParamVector fedavg_aggregate(const ParamVector& global,
                                    const std::vector<LocalUpdate>& updates) {
  if (updates.empty()) throw EmptyUpdateSet("no local updates to aggregate");
  long total = 0;
  for (const LocalUpdate& u : updates) {
    if (u.delta.size() != global.size())
      throw LengthMismatch("update length differs from global model");
    total += u.n_k;
  }
  ParamVector next = global;
  for (const LocalUpdate& u : updates) {
    const double w = static_cast<double>(u.n_k) / static_cast<double>(total);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += w * u.delta[i];
  }
  for (const LocalUpdate& u : updates) {
    if (u.residual.empty()) continue;
    if (u.residual.size() != global.size())
      throw LengthMismatch("residual length differs from global model");
    const double w = static_cast<double>(u.n_k) / static_cast<double>(total);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += w * u.residual[i];
  }
  return next;
}

// One synchronous round: select, train each selected client from the same
// G_t, aggregate, evaluate on the test set, append the record.
inline RoundRecord run_round(ServerState& server,
                             const std::vector<ClientDataset>& clients,
                             int k_selected,
                             std::span<const EncodedSample> test,
                             const EmbeddingTable& table,
                             const TrainConfig& cfg, Workspace& ws) {
  std::vector<int> ids = select_clients(static_cast<int>(clients.size()),
                                        k_selected, server.selection_rng);
  std::vector<LocalUpdate> updates;
  updates.reserve(ids.size());
  for (int id : ids)
    updates.push_back(local_train(clients[static_cast<std::size_t>(id)],
                                  server.global, server.arch, table, cfg,
                                  server.seed, server.round));
  server.global = fedavg_aggregate(server.global, updates);
  RoundRecord record;
  record.round = server.round;
  record.selected = ids;
  ModelParams current = unflatten(server.arch, server.global);
  record.accuracy = evaluate(current, test, table, ws);
  double loss = 0.0;
  for (const LocalUpdate& u : updates) loss += u.mean_loss;
  record.mean_loss = loss / static_cast<double>(updates.size());
  server.history.push_back(record);
  server.round += 1;
  return record;
}

// --- baselines --------------------------------------------------------------

// Halts after `patience` consecutive epochs without a strict improvement
// (patience 0 stops at the first non-improving epoch).
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when training should stop after this observation.
  bool observe(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      since_ = 0;
      return false;
    }
    ++since_;
    return since_ >= std::max(1, patience_);
  }

  double best() const { return best_; }
  bool improved_last() const { return since_ == 0; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_ = 0;
};

struct FitResult {
  ModelParams model;                 // best-validation-loss parameters
  std::vector<RoundRecord> history;  // one record per epoch
  double test_accuracy = 0.0;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  int epochs_run = 0;
};

namespace detail {

// Stratified held-out split for early stopping. fraction == 0 disables the
// split (and with it early stopping), leaving `fit` as the input in its
// original order.
inline void split_validation(const std::vector<EncodedSample>& data,
                             double fraction, std::uint64_t seed,
                             std::vector<EncodedSample>& fit,
                             std::vector<EncodedSample>& val) {
  fit.clear();
  val.clear();
  if (fraction <= 0.0) {
    fit = data;
    return;
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[data[i].label == 1 ? 1 : 0].push_back(i);
  std::vector<bool> in_val(data.size(), false);
  for (int c = 0; c < 2; ++c) {
    Rng rng = derive_rng(seed, Stream::Split, 8 + static_cast<std::uint64_t>(c));
    rng.shuffle(by_class[c]);
    auto take = static_cast<std::size_t>(
        fraction * static_cast<double>(by_class[c].size()) + 0.5);
    take = std::min(take, by_class[c].empty() ? 0 : by_class[c].size() - 1);
    for (std::size_t i = 0; i < take; ++i) in_val[by_class[c][i]] = true;
  }
  for (std::size_t i = 0; i < data.size(); ++i)
    (in_val[i] ? val : fit).push_back(data[i]);
}

}  // namespace detail

// Centralized baseline: epoch loop over the full train split with a held-out
// validation set for early stopping. The Adam state is reset at every epoch
// boundary, exactly like a federated round with one client, so a K=1 /
// K_selected=1 / one-local-epoch federated run retraces this trajectory
// step for step.
inline FitResult train_centralized(
    const std::vector<EncodedSample>& train,
    std::span<const EncodedSample> test, const EmbeddingTable& table,
    const ModelConfig& arch, const TrainConfig& cfg, std::uint64_t seed,
    const std::function<void(int, const ParamVector&)>& on_epoch = {}) {
  if (train.empty()) throw EmptyDataset("train split is empty");
  std::vector<EncodedSample> fit, val;
  detail::split_validation(train, cfg.validation_fraction, seed, fit, val);
  ModelParams params = init_params(arch, derive_seed(seed, Stream::ModelInit));
  Workspace ws(arch);
  ModelParams grads = zero_params(arch);
  FitResult result;
  EarlyStopper stopper(cfg.patience);
  ModelParams best = params;
  bool stop = false;
  int epoch = 0;
  for (; epoch < cfg.max_epochs && !stop; ++epoch) {
    Rng order_rng = derive_rng(seed, Stream::Shuffle, 0,
                               static_cast<std::uint64_t>(epoch));
    AdamState adam(param_count(arch));
    double train_loss =
        train_one_epoch(params, fit, table, cfg, order_rng, adam, ws, grads);
    RoundRecord rec;
    rec.round = epoch;
    rec.accuracy = evaluate(params, test, table, ws);
    rec.mean_loss = train_loss;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(epoch, flatten(params));
    if (!val.empty()) {
      double vloss = mean_loss(params, val, table, ws);
      stop = stopper.observe(vloss);
      if (stopper.improved_last()) best = params;
    } else {
      best = params;
    }
  }
  result.epochs_run = epoch;
  result.best_val_loss = val.empty()
                             ? std::numeric_limits<double>::quiet_NaN()
                             : stopper.best();
  result.model = best;
  result.test_accuracy = evaluate(result.model, test, table, ws);
  return result;
}

// Standalone baseline: one client training on its local data only, with the
// same hyperparameters and early stopping as centralized learning.
inline FitResult train_standalone(const ClientDataset& client,
                                  std::span<const EncodedSample> test,
                                  const EmbeddingTable& table,
                                  const ModelConfig& arch,
                                  const TrainConfig& cfg,
                                  std::uint64_t seed) {
  if (client.samples.empty()) throw EmptyClient("client has no samples");
  return train_centralized(client.samples, test, table, arch, cfg, seed);
}

}  // namespace fedphish
