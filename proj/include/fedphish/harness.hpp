#pragma once

// Experiment orchestration: configuration, seed sweeps, the K x alpha grid,
// synthetic corpus generation, round logs, summaries, and plot-data emission.
// Every output byte is a deterministic function of the configuration: seeds
// own derived RNG streams, files are written with fixed formatting, and seed
// cells are isolated so a work pool may run them concurrently.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedphish/checkpoint.hpp"
#include "fedphish/eml.hpp"
#include "fedphish/embedding.hpp"
#include "fedphish/errors.hpp"
#include "fedphish/fed.hpp"
#include "fedphish/nn.hpp"
#include "fedphish/partition.hpp"
#include "fedphish/rng.hpp"
#include "fedphish/text.hpp"

namespace fedphish {

enum class Mode { Centralized, Standalone, Federated };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Centralized: return "centralized";
    case Mode::Standalone: return "standalone";
    case Mode::Federated: return "federated";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "centralized") return Mode::Centralized;
  if (s == "standalone") return Mode::Standalone;
  if (s == "federated") return Mode::Federated;
  return std::nullopt;
}

struct ExperimentConfig {
  Mode mode = Mode::Federated;
  int clients = 10;     // K
  int k_selected = 3;   // per-round participants
  double alpha = 0.0;   // label-skew level; 0 selects the IID partition
  int rounds = 50;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  std::string phishing_dir;
  std::string legitimate_dir;
  std::string embedding_path;
  int embedding_dim = 100;
  int min_len = kMinSequenceLength;
  double train_fraction = 0.8;

  ModelConfig arch;  // arch.seq_len doubles as the encoder's max length
  TrainConfig train;

  std::string out_dir = "runs";
  int checkpoint_every = 0;  // in rounds; 0 disables
  int threads = 1;           // parallelism over seeds

  void validate() const {
    if (clients < 1) throw ConfigInvalid("clients", "must be >= 1");
    if (k_selected < 1 || k_selected > clients)
      throw ConfigInvalid("k_selected", "need 1 <= K_selected <= K");
    if (alpha < 0.0 || alpha > 1.0)
      throw ConfigInvalid("alpha", "must lie in [0, 1]");
    if (rounds < 1) throw ConfigInvalid("rounds", "must be >= 1");
    if (seeds.empty()) throw ConfigInvalid("seeds", "need at least one seed");
    if (embedding_dim < 1) throw ConfigInvalid("embedding_dim", "must be >= 1");
    if (arch.input_dim != embedding_dim)
      throw ConfigInvalid("arch.input_dim",
                          "must equal the embedding dimension");
    if (arch.seq_len < min_len)
      throw ConfigInvalid("arch.seq_len", "shorter than the minimum length");
    if (train.batch < 1) throw ConfigInvalid("batch", "must be >= 1");
    if (train.lr <= 0.0) throw ConfigInvalid("lr", "must be positive");
    if (train.local_epochs < 0)
      throw ConfigInvalid("local_epochs", "must be >= 0");
    if (train.max_epochs < 1) throw ConfigInvalid("max_epochs", "must be >= 1");
    if (train.validation_fraction < 0.0 || train.validation_fraction >= 1.0)
      throw ConfigInvalid("validation_fraction", "must lie in [0, 1)");
    if (threads < 1) throw ConfigInvalid("threads", "must be >= 1");
    if (phishing_dir.empty()) throw ConfigInvalid("phishing_dir", "missing");
    if (legitimate_dir.empty())
      throw ConfigInvalid("legitimate_dir", "missing");
    if (embedding_path.empty())
      throw ConfigInvalid("embedding_path", "missing");
  }
};

// Canonical key=value rendering; the fingerprint hashes this string, so two
// configs agree iff their fingerprints do.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "mode=" << mode_name(c.mode) << '\n'
      << "clients=" << c.clients << '\n'
      << "k_selected=" << c.k_selected << '\n'
      << "alpha=" << num(c.alpha) << '\n'
      << "rounds=" << c.rounds << '\n';
  out << "seeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i)
    out << (i ? "," : "") << c.seeds[i];
  out << '\n';
  out << "phishing_dir=" << c.phishing_dir << '\n'
      << "legitimate_dir=" << c.legitimate_dir << '\n'
      << "embedding_path=" << c.embedding_path << '\n'
      << "embedding_dim=" << c.embedding_dim << '\n'
      << "min_len=" << c.min_len << '\n'
      << "train_fraction=" << num(c.train_fraction) << '\n'
      << "seq_len=" << c.arch.seq_len << '\n'
      << "hidden=" << c.arch.hidden << '\n'
      << "bilstm_layers=" << c.arch.bilstm_layers << '\n'
      << "dense_units=" << c.arch.dense_units << '\n'
      << "lr=" << num(c.train.lr) << '\n'
      << "batch=" << c.train.batch << '\n'
      << "local_epochs=" << c.train.local_epochs << '\n'
      << "patience=" << c.train.patience << '\n'
      << "validation_fraction=" << num(c.train.validation_fraction) << '\n'
      << "max_epochs=" << c.train.max_epochs << '\n'
      << "clip_gradients=" << (c.train.clip_gradients ? 1 : 0) << '\n'
      << "clip_norm=" << num(c.train.clip_norm) << '\n';
  return out.str();
}

inline std::uint64_t config_fingerprint(const ExperimentConfig& c) {
  std::string s = serialize_config(c);
  return fnv1a(s.data(), s.size());
}

struct ExperimentSummary {
  std::string label;
  Mode mode = Mode::Federated;
  int clients = 0;
  double alpha = 0.0;
  std::vector<double> per_seed;  // last-five-rounds mean accuracy per seed
  double mean_accuracy = 0.0;
  double stddev = 0.0;
  std::uint64_t fingerprint = 0;
};

// --- round logs -------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_round_csv(const std::string& path,
                            const std::vector<RoundRecord>& history) {
  std::ofstream out(path);
  if (!out) throw DataUnreadable(path);
  out << "round,accuracy,mean_loss,selected_ids\n";
  for (const RoundRecord& r : history) {
    out << r.round << ',' << format_double(r.accuracy) << ','
        << format_double(r.mean_loss) << ',';
    for (std::size_t i = 0; i < r.selected.size(); ++i)
      out << (i ? ";" : "") << r.selected[i];
    out << '\n';
  }
}

inline std::vector<RoundRecord> read_round_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataUnreadable(path);
  std::vector<RoundRecord> history;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RoundRecord r;
    std::size_t p1 = line.find(','), p2 = line.find(',', p1 + 1),
                p3 = line.find(',', p2 + 1);
    r.round = std::stoi(line.substr(0, p1));
    r.accuracy = std::strtod(line.c_str() + p1 + 1, nullptr);
    r.mean_loss = std::strtod(line.c_str() + p2 + 1, nullptr);
    std::string ids = line.substr(p3 + 1);
    std::size_t pos = 0;
    while (pos < ids.size()) {
      std::size_t semi = ids.find(';', pos);
      std::string tok = ids.substr(pos, semi == std::string::npos
                                            ? std::string::npos
                                            : semi - pos);
      if (!tok.empty()) r.selected.push_back(std::stoi(tok));
      if (semi == std::string::npos) break;
      pos = semi + 1;
    }
    history.push_back(std::move(r));
  }
  return history;
}

// The paper's headline metric: mean test accuracy over the last five rounds.
inline double last_rounds_mean(const std::vector<RoundRecord>& history,
                               int n = 5) {
  if (history.empty()) throw EmptyDataset("empty history");
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(n), history.size());
  double sum = 0.0;
  for (std::size_t i = history.size() - take; i < history.size(); ++i)
    sum += history[i].accuracy;
  return sum / static_cast<double>(take);
}

// --- synthetic corpus -------------------------------------------------------

struct SyntheticCorpus {
  std::vector<Document> phishing;
  std::vector<Document> legitimate;
};

namespace detail {

// Vocabulary words that survive the text pipeline unchanged, in table order.
inline std::vector<std::string> pipeline_stable_words(
    const EmbeddingTable& table, const TextPipeline& pipeline) {
  std::vector<std::string> out;
  for (const std::string& w : table.words) {
    if (w.size() < 3 || w.size() > 10) continue;
    bool ascii_lower = true;
    for (char ch : w)
      if (ch < 'a' || ch > 'z') ascii_lower = false;
    if (!ascii_lower) continue;
    if (pipeline.stopwords.count(w)) continue;
    if (lemmatize(w, pipeline.lemma_exceptions) != w) continue;
    out.push_back(w);
  }
  return out;
}

}  // namespace detail

// Two-class documents assembled from class-conditional unigram draws over the
// embedding vocabulary: per class a disjoint topic pool plus shared
// background words. Lengths are uniform in [10, 250] tokens, so the encoder
// sees both truncation and padding. Words are chosen to pass the text
// pipeline unchanged, which keeps the classes learnably separable end to end.
inline SyntheticCorpus gen_synthetic_corpus(int n_per_class,
                                            std::uint64_t seed,
                                            const EmbeddingTable& table) {
  if (n_per_class < 1)
    throw ConfigInvalid("n_per_class", "must be >= 1");
  const TextPipeline& pipeline = TextPipeline::builtin();
  std::vector<std::string> words =
      detail::pipeline_stable_words(table, pipeline);
  constexpr std::size_t kTopic = 40;
  if (words.size() < 2 * kTopic + 50)
    throw ConfigInvalid("embedding",
                        "vocabulary too small for corpus generation");
  const std::size_t background = std::min<std::size_t>(400, words.size() - 2 * kTopic);
  constexpr double kTopicRate = 0.35;
  SyntheticCorpus corpus;
  for (int label = 0; label <= 1; ++label) {
    const std::size_t topic_base = label == 1 ? 0 : kTopic;
    for (int i = 0; i < n_per_class; ++i) {
      Rng rng = derive_rng(seed, Stream::Corpus,
                           static_cast<std::uint64_t>(label),
                           static_cast<std::uint64_t>(i));
      const int len = 10 + static_cast<int>(rng.below(241));  // [10, 250]
      std::string text;
      for (int t = 0; t < len; ++t) {
        const std::string& w =
            rng.uniform() < kTopicRate
                ? words[topic_base + rng.below(kTopic)]
                : words[2 * kTopic + rng.below(background)];
        if (!text.empty()) text += ' ';
        text += w;
      }
      Document doc;
      doc.text = std::move(text);
      doc.label = label;
      char name[64];
      std::snprintf(name, sizeof(name), "synthetic_%s_%05d.eml",
                    label == 1 ? "phishing" : "legitimate", i);
      doc.source_id = name;
      auto& bucket = label == 1 ? corpus.phishing : corpus.legitimate;
      bucket.push_back(std::move(doc));
    }
  }
  return corpus;
}

// Write documents as minimal RFC-822 files (subject: first tokens, body: the
// rest), one per file, under dir. Drop-in replacement for a real corpus.
inline void write_eml_corpus(const std::vector<Document>& docs,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const Document& doc : docs) {
    std::ofstream out(dir / doc.source_id, std::ios::binary);
    if (!out) throw DataUnreadable((dir / doc.source_id).string());
    std::size_t cut = 0;
    int words = 0;
    while (cut < doc.text.size() && words < 4) {
      std::size_t sp = doc.text.find(' ', cut);
      if (sp == std::string::npos) {
        cut = doc.text.size();
        break;
      }
      cut = sp + 1;
      ++words;
    }
    std::string subject = doc.text.substr(0, cut == 0 ? 0 : cut - 1);
    std::string body = cut >= doc.text.size() ? "" : doc.text.substr(cut);
    out << "Subject: " << subject << "\r\n"
        << "MIME-Version: 1.0\r\n"
        << "Content-Type: text/plain; charset=utf-8\r\n"
        << "\r\n"
        << body << "\r\n";
  }
}

// A deterministic stand-in for a published embedding file: pseudo-words with
// uniform vectors, written in the exact GloVe text format. Generated words
// are lowercase letter strings that the text pipeline passes through
// unchanged.
inline void gen_synthetic_embedding_file(const std::string& path,
                                         int vocab_size, int dim,
                                         std::uint64_t seed) {
  if (vocab_size < 1 || dim < 1)
    throw ConfigInvalid("vocab_size", "embedding shape must be positive");
  std::ofstream out(path);
  if (!out) throw DataUnreadable(path);
  const TextPipeline& pipeline = TextPipeline::builtin();
  Rng rng = derive_rng(seed, Stream::Embedding);
  std::unordered_set<std::string> used;
  static const char kConsonants[] = "bcdfghjklmnpqrstvwz";
  static const char kVowels[] = "aeiou";
  char buf[64];
  int written = 0;
  while (written < vocab_size) {
    const int len = 3 + static_cast<int>(rng.below(6));
    std::string w;
    for (int i = 0; i < len; ++i)
      w += (i % 2 == 0) ? kConsonants[rng.below(sizeof(kConsonants) - 1)]
                        : kVowels[rng.below(sizeof(kVowels) - 1)];
    if (used.count(w)) continue;
    if (pipeline.stopwords.count(w)) continue;
    if (lemmatize(w, pipeline.lemma_exceptions) != w) continue;
    used.insert(w);
    out << w;
    for (int d = 0; d < dim; ++d) {
      std::snprintf(buf, sizeof(buf), " %.17g", rng.uniform(-0.5, 0.5));
      out << buf;
    }
    out << '\n';
    ++written;
  }
}

// --- the experiment runner --------------------------------------------------

struct LoadedData {
  EmbeddingTable table;
  std::vector<EncodedSample> phishing;
  std::vector<EncodedSample> legitimate;
  std::size_t rejected = 0;  // under-length documents
  std::size_t duplicates = 0;
};

// ingest -> preprocess -> encode -> dedupe, split by label. Pure given the
// files on disk, so one load can serve every seed.
inline LoadedData load_data(const ExperimentConfig& cfg) {
  LoadedData data;
  data.table = load_embedding(cfg.embedding_path, cfg.embedding_dim);
  const TextPipeline& pipeline = TextPipeline::builtin();
  std::vector<EncodedSample> all;
  for (int label = 0; label <= 1; ++label) {
    IngestResult ingested = ingest_directory(
        label == 1 ? cfg.phishing_dir : cfg.legitimate_dir, label);
    for (const Document& doc : ingested.documents) {
      ProcessedText text = preprocess(doc, pipeline);
      auto sample = encode(text, data.table, cfg.arch.seq_len, cfg.min_len);
      if (!sample) {
        ++data.rejected;
        continue;
      }
      all.push_back(std::move(*sample));
    }
  }
  std::size_t before = all.size();
  all = dedupe(std::move(all));
  data.duplicates = before - all.size();
  for (EncodedSample& s : all)
    (s.label == 1 ? data.phishing : data.legitimate).push_back(std::move(s));
  return data;
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Bounded work pool over seed indices; with threads == 1 it degenerates to a
// plain loop. Each task writes only its own slot, so scheduling order cannot
// affect results.
template <class F>
void for_each_index(std::size_t count, int threads, F&& work) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto runner = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      work(i);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(runner);
  for (std::thread& t : pool) t.join();
}

inline std::string seed_csv_path(const std::string& dir, std::uint64_t seed) {
  return dir + "/rounds_seed" + std::to_string(seed) + ".csv";
}

}  // namespace detail

// One seed of one experiment. Returns the per-seed headline accuracy (mean
// over the last five logged rounds) and writes the seed's round log.
inline double run_single_seed(const ExperimentConfig& cfg,
                              const LoadedData& data, std::uint64_t seed) {
  TrainTestSplit split = balance_and_split(data.phishing, data.legitimate,
                                           seed, cfg.train_fraction);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  switch (cfg.mode) {
    case Mode::Federated: {
      SplitSpec spec{cfg.clients, cfg.alpha, seed, cfg.train_fraction};
      std::vector<ClientDataset> clients = make_partition(split.train, spec);
      std::ofstream manifest(cfg.out_dir + "/partition_seed" +
                             std::to_string(seed) + ".json");
      manifest << partition_manifest(clients).dump(2);
      ServerState server(cfg.arch, seed);
      Workspace ws(cfg.arch);
      for (int r = 0; r < cfg.rounds; ++r) {
        run_round(server, clients, cfg.k_selected, split.test, data.table,
                  cfg.train, ws);
        if (cfg.checkpoint_every > 0 && (r + 1) % cfg.checkpoint_every == 0)
          save_checkpoint(cfg.out_dir + "/model_seed" + std::to_string(seed) +
                              "_round" + std::to_string(r + 1) + ".json",
                          cfg.arch, server.global);
      }
      write_round_csv(detail::seed_csv_path(cfg.out_dir, seed),
                      server.history);
      return last_rounds_mean(server.history);
    }
    case Mode::Centralized: {
      FitResult fit = train_centralized(split.train, split.test, data.table,
                                        cfg.arch, cfg.train, seed);
      write_round_csv(detail::seed_csv_path(cfg.out_dir, seed), fit.history);
      return last_rounds_mean(fit.history);
    }
    case Mode::Standalone: {
      SplitSpec spec{cfg.clients, cfg.alpha, seed, cfg.train_fraction};
      std::vector<ClientDataset> clients = make_partition(split.train, spec);
      std::vector<double> per_client;
      std::ofstream table_out(cfg.out_dir + "/standalone_seed" +
                              std::to_string(seed) + ".csv");
      table_out << "client_id,p_k,accuracy,last5_accuracy,epochs\n";
      for (const ClientDataset& client : clients) {
        FitResult fit = train_standalone(client, split.test, data.table,
                                         cfg.arch, cfg.train, seed);
        const double last5 = last_rounds_mean(fit.history);
        per_client.push_back(last5);
        table_out << client.client_id << ','
                  << format_double(client.phishing_fraction) << ','
                  << format_double(fit.test_accuracy) << ','
                  << format_double(last5) << ',' << fit.epochs_run << '\n';
        write_round_csv(cfg.out_dir + "/rounds_seed" + std::to_string(seed) +
                            "_client" + std::to_string(client.client_id) +
                            ".csv",
                        fit.history);
      }
      return detail::mean_of(per_client);
    }
  }
  throw ConfigInvalid("mode", "unknown mode");
}

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                        const LoadedData& data) {
  cfg.validate();
  ExperimentSummary summary;
  summary.mode = cfg.mode;
  summary.clients = cfg.clients;
  summary.alpha = cfg.alpha;
  summary.label = std::string(mode_name(cfg.mode)) + "_k" +
                  std::to_string(cfg.clients) + "_sel" +
                  std::to_string(cfg.k_selected) + "_a" +
                  std::to_string(cfg.alpha);
  summary.fingerprint = config_fingerprint(cfg);
  summary.per_seed.resize(cfg.seeds.size());
  detail::for_each_index(
      cfg.seeds.size(), cfg.threads, [&](std::size_t i) {
        summary.per_seed[i] = run_single_seed(cfg, data, cfg.seeds[i]);
      });
  summary.mean_accuracy = detail::mean_of(summary.per_seed);
  summary.stddev = detail::stddev_of(summary.per_seed);

  nlohmann::json doc;
  doc["label"] = summary.label;
  doc["mode"] = mode_name(cfg.mode);
  doc["clients"] = cfg.clients;
  doc["k_selected"] = cfg.k_selected;
  doc["alpha"] = cfg.alpha;
  doc["rounds"] = cfg.rounds;
  doc["per_seed_last5_accuracy"] = summary.per_seed;
  doc["mean_accuracy"] = summary.mean_accuracy;
  doc["stddev"] = summary.stddev;
  doc["fingerprint"] = summary.fingerprint;
  std::ofstream out(cfg.out_dir + "/summary.json");
  out << doc.dump(2) << '\n';
  return summary;
}

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  LoadedData data = load_data(cfg);
  return run_experiment(cfg, data);
}

// Recompute a summary's per-seed values from the round logs alone.
inline std::vector<double> summary_from_round_logs(
    const ExperimentConfig& cfg) {
  std::vector<double> per_seed;
  for (std::uint64_t seed : cfg.seeds) {
    if (cfg.mode == Mode::Standalone) {
      std::vector<double> per_client;
      for (int c = 0; c < cfg.clients; ++c) {
        auto history = read_round_csv(cfg.out_dir + "/rounds_seed" +
                                      std::to_string(seed) + "_client" +
                                      std::to_string(c) + ".csv");
        per_client.push_back(last_rounds_mean(history));
      }
      per_seed.push_back(detail::mean_of(per_client));
    } else {
      per_seed.push_back(
          last_rounds_mean(read_round_csv(detail::seed_csv_path(cfg.out_dir, seed))));
    }
  }
  return per_seed;
}

// --- the paper grid ----------------------------------------------------------

constexpr double kNonConvergenceFloor = 0.6;

struct GridCell {
  int clients = 0;
  int k_selected = 0;
  double alpha = 0.0;
  ExperimentSummary summary;
  bool converged = true;
};

// K x alpha sweep with K_selected tied to K (10->3, 20->6, 50->15). Cells
// whose final mean accuracy sits below 0.6 are flagged non-converged.
inline std::vector<GridCell> run_grid(ExperimentConfig base) {
  static const std::pair<int, int> kClientGrid[] = {{10, 3}, {20, 6}, {50, 15}};
  static const double kAlphaGrid[] = {0.0, 0.2, 0.6, 1.0};
  base.mode = Mode::Federated;
  LoadedData data = load_data(base);
  std::vector<GridCell> cells;
  const std::string root = base.out_dir;
  for (auto [k, sel] : kClientGrid) {
    for (double alpha : kAlphaGrid) {
      ExperimentConfig cfg = base;
      cfg.clients = k;
      cfg.k_selected = sel;
      cfg.alpha = alpha;
      char label[64];
      std::snprintf(label, sizeof(label), "k%02d_a%.1f", k, alpha);
      cfg.out_dir = root + "/" + label;
      std::filesystem::create_directories(cfg.out_dir);
      GridCell cell;
      cell.clients = k;
      cell.k_selected = sel;
      cell.alpha = alpha;
      cell.summary = run_experiment(cfg, data);
      cell.converged = cell.summary.mean_accuracy >= kNonConvergenceFloor;
      cells.push_back(std::move(cell));
    }
  }
  std::ofstream out(root + "/grid.csv");
  out << "clients,k_selected,alpha,mean_accuracy,stddev,converged\n";
  for (const GridCell& c : cells) {
    out << c.clients << ',' << c.k_selected << ',' << format_double(c.alpha)
        << ',' << format_double(c.summary.mean_accuracy) << ','
        << format_double(c.summary.stddev) << ',' << (c.converged ? 1 : 0)
        << '\n';
  }
  return cells;
}

// --- plot data ---------------------------------------------------------------

struct SeriesPoint {
  int round = 0;
  double mean = 0.0;
  double stddev = 0.0;
  int n_seeds = 0;
};

// Per-round mean and stddev of test accuracy across every rounds_seed*.csv in
// an experiment directory. Seeds that stopped early simply stop contributing.
inline std::vector<SeriesPoint> aggregate_rounds(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("rounds_seed", 0) == 0 &&
          name.find("_client") == std::string::npos &&
          entry.path().extension() == ".csv")
        files.push_back(entry.path());
    }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<double>> per_round;  // round -> accuracies
  for (const fs::path& f : files) {
    auto history = read_round_csv(f.string());
    for (std::size_t r = 0; r < history.size(); ++r) {
      if (per_round.size() <= r) per_round.resize(r + 1);
      per_round[r].push_back(history[r].accuracy);
    }
  }
  std::vector<SeriesPoint> points;
  for (std::size_t r = 0; r < per_round.size(); ++r) {
    SeriesPoint p;
    p.round = static_cast<int>(r);
    p.mean = detail::mean_of(per_round[r]);
    p.stddev = detail::stddev_of(per_round[r]);
    p.n_seeds = static_cast<int>(per_round[r].size());
    points.push_back(p);
  }
  return points;
}

// Combined per-figure CSV: one series per input directory, enough to re-render
// accuracy-vs-round plots with any tool.
inline void emit_plot_data(const std::vector<std::string>& dirs,
                           const std::vector<std::string>& series_names,
                           const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw DataUnreadable(out_path);
  out << "series,round,mean_accuracy,stddev,n_seeds\n";
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const std::string name =
        i < series_names.size() ? series_names[i] : dirs[i];
    for (const SeriesPoint& p : aggregate_rounds(dirs[i]))
      out << name << ',' << p.round << ',' << format_double(p.mean) << ','
          << format_double(p.stddev) << ',' << p.n_seeds << '\n';
  }
}

}  // namespace fedphish
