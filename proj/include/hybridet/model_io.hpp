#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "hybridet/mlp.hpp"
#include "hybridet/scorer.hpp"
#include "hybridet/train.hpp"

namespace hybridet {

// Checkpoint files are a single JSON document, version "MLP1": a header with
// the dimensions, taxonomy hash and train config, plus base64-encoded
// little-endian binary64 parameter blocks. Serialization is canonical
// (sorted keys, exact float round-trip), so identical params produce
// byte-identical files.

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     std::uint64_t taxonomy_hash, const TrainConfig& cfg);

struct Checkpoint {
  MlpParams params;
  std::uint64_t taxonomy_hash = 0;
  nlohmann::json config;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Linear SVM baseline checkpoints, version "SVM1".
void save_svm(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_svm(const std::filesystem::path& path);

// Model file dispatch: "MLP1" or "SVM1".
std::string checkpoint_version(const std::filesystem::path& path);

nlohmann::json history_to_json(const TrainHistory& history);

}  // namespace hybridet
