#pragma once

// Model checkpoints: a JSON container holding the canonical flat parameter
// vector plus an architecture descriptor. Loading refuses descriptor
// mismatches instead of reinterpreting bytes.

#include <fstream>
#include <string>

#include <json.hpp>

#include "fedphish/errors.hpp"
#include "fedphish/nn.hpp"

namespace fedphish {

constexpr int kCheckpointVersion = 1;

inline nlohmann::json arch_descriptor(const ModelConfig& cfg) {
  return {{"seq_len", cfg.seq_len},
          {"input_dim", cfg.input_dim},
          {"hidden", cfg.hidden},
          {"bilstm_layers", cfg.bilstm_layers},
          {"dense_units", cfg.dense_units}};
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ParamVector& values) {
  nlohmann::json doc;
  doc["version"] = kCheckpointVersion;
  doc["arch"] = arch_descriptor(cfg);
  doc["values"] = values;
  std::ofstream out(path);
  if (!out) throw DataUnreadable(path);
  out << doc.dump();
}

inline ParamVector load_checkpoint(const std::string& path,
                                   const ModelConfig& expected) {
  std::ifstream in(path);
  if (!in) throw DataUnreadable(path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, true);
  if (doc.value("version", -1) != kCheckpointVersion)
    throw ConfigInvalid("version", "unsupported checkpoint version");
  if (doc["arch"] != arch_descriptor(expected))
    throw ConfigInvalid("arch", "checkpoint architecture descriptor mismatch");
  ParamVector values = doc["values"].get<ParamVector>();
  if (values.size() != param_count(expected))
    throw LengthMismatch("checkpoint value count mismatch");
  return values;
}

}  // namespace fedphish
