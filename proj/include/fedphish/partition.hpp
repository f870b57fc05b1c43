#pragma once

// Dataset balancing, the 4:1 train/test split, and distribution of the train
// set across K clients, either IID or at label-skew level alpha where
// alpha = |2 P_k - 1| and P_k is a client's phishing fraction.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedphish/embedding.hpp"
#include "fedphish/errors.hpp"
#include "fedphish/rng.hpp"

namespace fedphish {

struct ClientDataset {
  int client_id = 0;
  std::vector<EncodedSample> samples;
  double phishing_fraction = 0.0;  // P_k
};

struct SplitSpec {
  int clients = 1;         // K
  double alpha = 0.0;      // heterogeneity level in [0, 1]
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

struct TrainTestSplit {
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> test;
};

// P_k for a heterogeneity level: (1+alpha)/2 when the client's majority class
// is phishing, (1-alpha)/2 otherwise.
inline double alpha_to_probability(double alpha, int majority_class) {
  return majority_class == 1 ? (1.0 + alpha) / 2.0 : (1.0 - alpha) / 2.0;
}

namespace detail {

inline std::vector<EncodedSample> shuffled(std::vector<EncodedSample> v,
                                           Rng rng) {
  rng.shuffle(v);
  return v;
}

// Integer class targets t_i with sum(t) == total, each within one sample of
// the real target r_i and inside [0, cap_i]. Largest-remainder
// apportionment; the global remainder may push a target one past its
// rounding (|t_i - r_i| <= 1, never more), which keeps every client inside
// the one-sample skew band. Returns false when no such rounding exists
// (infeasible alpha/K for the data).
inline bool apportion(const std::vector<double>& targets,
                      const std::vector<int>& caps, int total,
                      std::vector<int>& out) {
  const std::size_t k = targets.size();
  out.assign(k, 0);
  std::vector<std::pair<double, std::size_t>> up, down;
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double r = std::min(std::max(targets[i], 0.0), static_cast<double>(caps[i]));
    int base = static_cast<int>(r);
    out[i] = base;
    assigned += base;
    if (base + 1 <= caps[i]) up.emplace_back(r - base, i);
    if (base >= 1 && r - (base - 1) <= 1.0) down.emplace_back(r - base, i);
  }
  int need = total - assigned;
  if (need >= 0) {
    // Highest fractional part first; ties broken by client id.
    std::sort(up.begin(), up.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [frac, i] : up) {
      if (need == 0) break;
      out[i] += 1;
      --need;
    }
    return need == 0;
  }
  // Overshoot: pull back integer-target clients (the only ones that stay
  // within one sample after a decrement), lowest fractional part first.
  std::sort(down.begin(), down.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  for (const auto& [frac, i] : down) {
    if (need == 0) break;
    out[i] -= 1;
    ++need;
  }
  return need == 0;
}

}  // namespace detail

// Subsample the larger class to the smaller class's size, then make a
// stratified train/test split. Per-class train count is
// floor(train_fraction * class_size); the remainder goes to test, so both
// splits stay balanced within one sample.
inline TrainTestSplit balance_and_split(std::vector<EncodedSample> phishing,
                                        std::vector<EncodedSample> legitimate,
                                        std::uint64_t seed,
                                        double train_fraction = 0.8) {
  if (phishing.empty() || legitimate.empty())
    throw EmptyClass("both classes must be nonempty");
  phishing = detail::shuffled(std::move(phishing), derive_rng(seed, Stream::Split, 1));
  legitimate =
      detail::shuffled(std::move(legitimate), derive_rng(seed, Stream::Split, 0));
  const std::size_t m = std::min(phishing.size(), legitimate.size());
  phishing.resize(m);
  legitimate.resize(m);
  const auto train_per_class =
      static_cast<std::size_t>(train_fraction * static_cast<double>(m));
  TrainTestSplit split;
  split.train.reserve(2 * train_per_class);
  split.test.reserve(2 * (m - train_per_class));
  for (std::size_t i = 0; i < m; ++i) {
    auto& dst = i < train_per_class ? split.train : split.test;
    dst.push_back(std::move(phishing[i]));
    dst.push_back(std::move(legitimate[i]));
  }
  Rng train_rng = derive_rng(seed, Stream::Split, 2);
  train_rng.shuffle(split.train);
  Rng test_rng = derive_rng(seed, Stream::Split, 3);
  test_rng.shuffle(split.test);
  return split;
}

// Equal-size IID shards: every client gets size/K samples (remainder spread
// one-each over the first clients) with per-client phishing counts equal
// within one sample. K == 1 is the identity partition.
inline std::vector<ClientDataset> partition_iid(
    const std::vector<EncodedSample>& train, int clients, std::uint64_t seed) {
  if (clients < 1) throw TooManyClients("client count must be >= 1");
  std::vector<EncodedSample> phishing, legitimate;
  for (const EncodedSample& s : train)
    (s.label == 1 ? phishing : legitimate).push_back(s);
  if (static_cast<std::size_t>(clients) >
      std::min(phishing.size(), legitimate.size()))
    throw TooManyClients("more clients than samples in the smaller class");
  if (clients == 1) {
    std::vector<ClientDataset> out(1);
    out[0].client_id = 0;
    out[0].samples = train;
    out[0].phishing_fraction = static_cast<double>(phishing.size()) /
                               static_cast<double>(train.size());
    return out;
  }
  Rng prng = derive_rng(seed, Stream::Partition, 0);
  prng.shuffle(phishing);
  Rng lrng = derive_rng(seed, Stream::Partition, 1);
  lrng.shuffle(legitimate);

  const int n = static_cast<int>(train.size());
  const int p_total = static_cast<int>(phishing.size());
  std::vector<int> sizes(static_cast<std::size_t>(clients));
  for (int i = 0; i < clients; ++i)
    sizes[static_cast<std::size_t>(i)] = n / clients + (i < n % clients ? 1 : 0);
  std::vector<double> targets(static_cast<std::size_t>(clients));
  for (int i = 0; i < clients; ++i)
    targets[static_cast<std::size_t>(i)] =
        static_cast<double>(p_total) * sizes[static_cast<std::size_t>(i)] / n;
  std::vector<int> phishing_counts;
  if (!detail::apportion(targets, sizes, p_total, phishing_counts))
    throw InsufficientClassSamples("cannot balance phishing across clients");

  std::vector<ClientDataset> out(static_cast<std::size_t>(clients));
  std::size_t ppos = 0, lpos = 0;
  for (int i = 0; i < clients; ++i) {
    ClientDataset& c = out[static_cast<std::size_t>(i)];
    c.client_id = i;
    const int want_p = phishing_counts[static_cast<std::size_t>(i)];
    const int want_l = sizes[static_cast<std::size_t>(i)] - want_p;
    if (want_l < 0 || lpos + static_cast<std::size_t>(want_l) > legitimate.size())
      throw InsufficientClassSamples("legitimate pool exhausted");
    for (int j = 0; j < want_p; ++j) c.samples.push_back(phishing[ppos++]);
    for (int j = 0; j < want_l; ++j) c.samples.push_back(legitimate[lpos++]);
    Rng crng = derive_rng(seed, Stream::Partition, 16 + static_cast<std::uint64_t>(i));
    crng.shuffle(c.samples);
    c.phishing_fraction =
        static_cast<double>(want_p) / static_cast<double>(c.samples.size());
  }
  return out;
}

// Label-skewed shards sharing one alpha. Exactly floor(K/2) or ceil(K/2)
// clients are phishing-majority (coin-assigned for odd K) so the class pools
// can actually cover the per-client targets; each client's phishing count is
// the apportioned rounding of P_k * size_k.
inline std::vector<ClientDataset> partition_heterogeneous(
    const std::vector<EncodedSample>& train, int clients, double alpha,
    std::uint64_t seed) {
  if (clients < 1) throw TooManyClients("client count must be >= 1");
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigInvalid("alpha", "must lie in [0, 1]");
  if (static_cast<std::size_t>(clients) > train.size())
    throw TooManyClients("more clients than train samples");
  std::vector<EncodedSample> phishing, legitimate;
  for (const EncodedSample& s : train)
    (s.label == 1 ? phishing : legitimate).push_back(s);
  if (phishing.empty() || legitimate.empty())
    throw EmptyClass("both classes must be present in train");
  Rng prng = derive_rng(seed, Stream::Partition, 0);
  prng.shuffle(phishing);
  Rng lrng = derive_rng(seed, Stream::Partition, 1);
  lrng.shuffle(legitimate);

  Rng arng = derive_rng(seed, Stream::Partition, 2);
  int majority_count = clients / 2;
  if (clients % 2 == 1 && arng.coin()) ++majority_count;
  std::vector<int> majority(static_cast<std::size_t>(clients), 0);
  for (int i = 0; i < majority_count; ++i) majority[static_cast<std::size_t>(i)] = 1;
  arng.shuffle(majority);

  const int n = static_cast<int>(train.size());
  const int p_total = static_cast<int>(phishing.size());
  std::vector<int> sizes(static_cast<std::size_t>(clients));
  std::vector<double> targets(static_cast<std::size_t>(clients));
  for (int i = 0; i < clients; ++i) {
    sizes[static_cast<std::size_t>(i)] = n / clients + (i < n % clients ? 1 : 0);
    targets[static_cast<std::size_t>(i)] =
        alpha_to_probability(alpha, majority[static_cast<std::size_t>(i)]) *
        sizes[static_cast<std::size_t>(i)];
  }
  std::vector<int> phishing_counts;
  if (!detail::apportion(targets, sizes, p_total, phishing_counts))
    throw InsufficientClassSamples(
        "alpha/K combination is infeasible for this train set");

  std::vector<ClientDataset> out(static_cast<std::size_t>(clients));
  std::size_t ppos = 0, lpos = 0;
  for (int i = 0; i < clients; ++i) {
    ClientDataset& c = out[static_cast<std::size_t>(i)];
    c.client_id = i;
    const int want_p = phishing_counts[static_cast<std::size_t>(i)];
    const int want_l = sizes[static_cast<std::size_t>(i)] - want_p;
    if (ppos + static_cast<std::size_t>(want_p) > phishing.size() ||
        lpos + static_cast<std::size_t>(want_l) > legitimate.size())
      throw InsufficientClassSamples("class pool exhausted");
    for (int j = 0; j < want_p; ++j) c.samples.push_back(phishing[ppos++]);
    for (int j = 0; j < want_l; ++j) c.samples.push_back(legitimate[lpos++]);
    Rng crng = derive_rng(seed, Stream::Partition, 16 + static_cast<std::uint64_t>(i));
    crng.shuffle(c.samples);
    c.phishing_fraction =
        static_cast<double>(want_p) / static_cast<double>(c.samples.size());
  }
  return out;
}

// alpha == 0 is the paper's IID setting; anything larger uses the skewed path.
inline std::vector<ClientDataset> make_partition(
    const std::vector<EncodedSample>& train, const SplitSpec& spec) {
  if (spec.alpha == 0.0)
    return partition_iid(train, spec.clients, spec.seed);
  return partition_heterogeneous(train, spec.clients, spec.alpha, spec.seed);
}

// JSON manifest (client -> P_k and sample origins) for experiment audits.
inline nlohmann::json partition_manifest(
    const std::vector<ClientDataset>& clients) {
  nlohmann::json doc;
  doc["clients"] = nlohmann::json::array();
  for (const ClientDataset& c : clients) {
    nlohmann::json entry;
    entry["client_id"] = c.client_id;
    entry["p_k"] = c.phishing_fraction;
    entry["source_ids"] = nlohmann::json::array();
    for (const EncodedSample& s : c.samples)
      entry["source_ids"].push_back(s.source_id);
    doc["clients"].push_back(std::move(entry));
  }
  return doc;
}

}  // namespace fedphish
