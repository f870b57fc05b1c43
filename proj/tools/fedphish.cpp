// Command-line front end: corpus ingestion, synthetic corpus generation,
// experiment runs, the K x alpha grid, plot-data emission, and the gradient
// checker. Exit codes: 0 success, 1 configuration error, 2 data error.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedphish/eml.hpp"
#include "fedphish/harness.hpp"
#include "fedphish/nn.hpp"
#include "fedphish/text.hpp"

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

void add_experiment_flags(CLI::App* cmd, fedphish::ExperimentConfig& cfg,
                          std::string& mode, std::string& seed_list) {
  cmd->add_option("--mode", mode, "centralized | standalone | federated");
  cmd->add_option("--clients,-k", cfg.clients, "client count K");
  cmd->add_option("--k-selected", cfg.k_selected, "clients trained per round");
  cmd->add_option("--alpha", cfg.alpha,
                  "heterogeneity level |2Pk-1| in [0,1]; 0 = IID");
  cmd->add_option("--rounds", cfg.rounds, "federated rounds");
  cmd->add_option("--seeds", seed_list, "comma-separated seed list");
  cmd->add_option("--phishing", cfg.phishing_dir, "phishing .eml directory");
  cmd->add_option("--legitimate", cfg.legitimate_dir,
                  "legitimate .eml directory");
  cmd->add_option("--embedding", cfg.embedding_path, "embedding text file");
  cmd->add_option("--dim", cfg.embedding_dim, "embedding dimension");
  cmd->add_option("--seq-len", cfg.arch.seq_len, "max sequence length");
  cmd->add_option("--min-len", cfg.min_len, "minimum token count");
  cmd->add_option("--hidden", cfg.arch.hidden, "LSTM units per direction");
  cmd->add_option("--bilstm-layers", cfg.arch.bilstm_layers, "BiLSTM layers");
  cmd->add_option("--dense-units", cfg.arch.dense_units, "dense layer width");
  cmd->add_option("--lr", cfg.train.lr, "Adam learning rate");
  cmd->add_option("--batch", cfg.train.batch, "batch size");
  cmd->add_option("--local-epochs", cfg.train.local_epochs,
                  "local epochs per round");
  cmd->add_option("--patience", cfg.train.patience, "early-stopping patience");
  cmd->add_option("--validation-fraction", cfg.train.validation_fraction,
                  "held-out fraction for early stopping (0 disables)");
  cmd->add_option("--max-epochs", cfg.train.max_epochs,
                  "epoch cap for centralized/standalone");
  cmd->add_flag("--clip-gradients", cfg.train.clip_gradients,
                "enable gradient-norm clipping (debugging)");
  cmd->add_option("--clip-norm", cfg.train.clip_norm, "clipping threshold");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--checkpoint-every", cfg.checkpoint_every,
                  "write a global-model checkpoint every N rounds");
  cmd->add_option("--threads", cfg.threads, "worker threads across seeds");
  cmd->set_config("--config", "", "key=value config file; flags override it");
}

void finish_config(fedphish::ExperimentConfig& cfg, const std::string& mode,
                   const std::string& seed_list) {
  if (!mode.empty()) {
    auto m = fedphish::parse_mode(mode);
    if (!m) throw fedphish::ConfigInvalid("mode", "unknown mode '" + mode + "'");
    cfg.mode = *m;
  }
  if (!seed_list.empty()) {
    cfg.seeds.clear();
    std::size_t pos = 0;
    while (pos <= seed_list.size()) {
      std::size_t comma = seed_list.find(',', pos);
      std::string tok = seed_list.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  cfg.phishing_dir = env_or("FEDPHISH_PHISHING_DIR", cfg.phishing_dir);
  cfg.legitimate_dir = env_or("FEDPHISH_LEGITIMATE_DIR", cfg.legitimate_dir);
  cfg.embedding_path = env_or("FEDPHISH_EMBEDDING", cfg.embedding_path);
  cfg.arch.input_dim = cfg.embedding_dim;
}

int cmd_ingest(const std::string& phishing_dir, const std::string& legit_dir,
               const std::string& out_path) {
  fedphish::IngestResult phish = fedphish::ingest_directory(phishing_dir, 1);
  fedphish::IngestResult legit = fedphish::ingest_directory(legit_dir, 0);
  std::ofstream out(out_path);
  if (!out) throw fedphish::DataUnreadable(out_path);
  auto dump = [&out](const std::vector<fedphish::Document>& docs) {
    for (const fedphish::Document& d : docs) {
      nlohmann::json line;
      line["source_id"] = d.source_id;
      line["label"] = d.label;
      line["text"] = d.text;
      out << line.dump() << '\n';
    }
  };
  dump(phish.documents);
  dump(legit.documents);
  for (const std::string& s : phish.skipped)
    std::cerr << "skipped (malformed): " << s << '\n';
  for (const std::string& s : legit.skipped)
    std::cerr << "skipped (malformed): " << s << '\n';
  std::cout << "ingested " << phish.documents.size() << " phishing and "
            << legit.documents.size() << " legitimate documents -> "
            << out_path << '\n';
  return 0;
}

int cmd_grad_check(int seq_len, int input_dim, int hidden, int dense,
                   double step, std::uint64_t seed) {
  fedphish::ModelConfig cfg;
  cfg.seq_len = seq_len;
  cfg.input_dim = input_dim;
  cfg.hidden = hidden;
  cfg.bilstm_layers = 3;
  cfg.dense_units = dense;
  fedphish::ModelParams params = fedphish::init_params(cfg, seed);

  // A tiny in-memory vocabulary so the check exercises the real embed path.
  fedphish::EmbeddingTable table;
  table.dim = input_dim;
  fedphish::Rng rng(fedphish::derive_seed(seed, fedphish::Stream::Embedding));
  const int vocab = 17;
  table.vectors = fedphish::Matrix::Zero(vocab + 2, input_dim);
  for (int w = 1; w <= vocab; ++w)
    for (int d = 0; d < input_dim; ++d)
      table.vectors(w, d) = rng.uniform(-0.5, 0.5);
  table.vectors.row(vocab + 1) =
      table.vectors.middleRows(1, vocab).colwise().mean();

  std::vector<fedphish::EncodedSample> batch;
  for (int s = 0; s < 2; ++s) {
    fedphish::EncodedSample sample;
    sample.label = s % 2;
    sample.true_length = seq_len;
    for (int t = 0; t < seq_len; ++t)
      sample.indices.push_back(1 + static_cast<int>(rng.below(vocab)));
    batch.push_back(std::move(sample));
  }
  fedphish::Workspace ws(cfg);
  fedphish::ParamVector analytic =
      fedphish::batch_gradient(params, batch, table, ws);
  fedphish::ParamVector numeric =
      fedphish::finite_difference_gradient(params, batch, table, step);
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({1e-6, std::abs(analytic[i]), std::abs(numeric[i])});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  std::cout << "parameters checked: " << analytic.size() << '\n'
            << "max relative error: " << worst << '\n';
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated phishing-detection simulator"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "parse .eml directories into a JSON-lines text dump");
  std::string in_phish, in_legit, ingest_out = "documents.jsonl";
  ingest->add_option("--phishing", in_phish)->required();
  ingest->add_option("--legitimate", in_legit)->required();
  ingest->add_option("--out", ingest_out);

  // gen-corpus
  auto* gen = app.add_subcommand(
      "gen-corpus", "write a synthetic two-class .eml corpus");
  std::string gen_out = "corpus";
  std::string gen_embedding, gen_emit_embedding;
  int gen_n = 594, gen_dim = 100, gen_vocab = 2000;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "corpus root (phishing/ + legitimate/)");
  gen->add_option("--n-per-class", gen_n);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--embedding", gen_embedding,
                  "existing embedding file to draw the vocabulary from");
  gen->add_option("--emit-embedding", gen_emit_embedding,
                  "generate a synthetic embedding file here first");
  gen->add_option("--dim", gen_dim, "dimension for --emit-embedding");
  gen->add_option("--vocab-size", gen_vocab, "words for --emit-embedding");

  // run / grid
  fedphish::ExperimentConfig run_cfg;
  std::string run_mode, run_seeds;
  auto* run = app.add_subcommand("run", "run one experiment configuration");
  add_experiment_flags(run, run_cfg, run_mode, run_seeds);

  fedphish::ExperimentConfig grid_cfg;
  std::string grid_mode, grid_seeds;
  auto* grid = app.add_subcommand(
      "grid", "sweep K x alpha over the standard grid (federated)");
  add_experiment_flags(grid, grid_cfg, grid_mode, grid_seeds);

  // plot-data
  auto* plot = app.add_subcommand(
      "plot-data", "aggregate round logs into plot-ready CSV");
  std::vector<std::string> plot_dirs, plot_series;
  std::string plot_out = "plot.csv";
  plot->add_option("--in", plot_dirs, "experiment output directories")
      ->required();
  plot->add_option("--series", plot_series, "series names (default: dirs)");
  plot->add_option("--out", plot_out);

  // grad-check
  auto* gc = app.add_subcommand(
      "grad-check", "compare analytic gradients with finite differences");
  int gc_seq = 6, gc_dim = 3, gc_hidden = 4, gc_dense = 8;
  double gc_step = 1e-5;
  std::uint64_t gc_seed = 7;
  gc->add_option("--seq-len", gc_seq);
  gc->add_option("--dim", gc_dim);
  gc->add_option("--hidden", gc_hidden);
  gc->add_option("--dense-units", gc_dense);
  gc->add_option("--step", gc_step);
  gc->add_option("--seed", gc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(in_phish, in_legit, ingest_out);
    if (*gen) {
      std::string embedding_path = gen_embedding;
      if (!gen_emit_embedding.empty()) {
        fedphish::gen_synthetic_embedding_file(gen_emit_embedding, gen_vocab,
                                               gen_dim, gen_seed);
        embedding_path = gen_emit_embedding;
        std::cout << "wrote embedding: " << gen_emit_embedding << " ("
                  << gen_vocab << " words, dim " << gen_dim << ")\n";
      }
      if (embedding_path.empty())
        throw fedphish::ConfigInvalid(
            "embedding", "give --embedding or --emit-embedding");
      fedphish::EmbeddingTable table =
          fedphish::load_embedding(embedding_path, gen_dim);
      fedphish::SyntheticCorpus corpus =
          fedphish::gen_synthetic_corpus(gen_n, gen_seed, table);
      fedphish::write_eml_corpus(corpus.phishing,
                                 std::filesystem::path(gen_out) / "phishing");
      fedphish::write_eml_corpus(
          corpus.legitimate, std::filesystem::path(gen_out) / "legitimate");
      std::cout << "wrote " << corpus.phishing.size() << " + "
                << corpus.legitimate.size() << " documents under " << gen_out
                << '\n';
      return 0;
    }
    if (*run) {
      finish_config(run_cfg, run_mode, run_seeds);
      fedphish::ExperimentSummary summary = fedphish::run_experiment(run_cfg);
      std::cout << summary.label
                << ": mean last-5 accuracy = " << summary.mean_accuracy
                << " (stddev " << summary.stddev << ", "
                << summary.per_seed.size() << " seeds)\n";
      return 0;
    }
    if (*grid) {
      finish_config(grid_cfg, grid_mode, grid_seeds);
      std::vector<fedphish::GridCell> cells = fedphish::run_grid(grid_cfg);
      for (const fedphish::GridCell& c : cells)
        std::cout << "K=" << c.clients << " alpha=" << c.alpha
                  << " accuracy=" << c.summary.mean_accuracy
                  << (c.converged ? "" : "  [non-converged]") << '\n';
      return 0;
    }
    if (*plot) {
      fedphish::emit_plot_data(plot_dirs, plot_series, plot_out);
      std::cout << "wrote " << plot_out << '\n';
      return 0;
    }
    if (*gc)
      return cmd_grad_check(gc_seq, gc_dim, gc_hidden, gc_dense, gc_step,
                            gc_seed);
  } catch (const fedphish::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const fedphish::DataUnreadable& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
