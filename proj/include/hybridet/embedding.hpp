#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hybridet/data.hpp"

namespace hybridet {

// Row i is aligned with manifest record i. Storage is float32; all training
// math promotes to double.
struct EmbeddingMatrix {
  std::uint32_t n = 0;
  std::uint32_t d = 0;
  std::vector<float> data;  // row-major, n*d

  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * d, d};
  }
  float& at(std::size_t i, std::size_t j) { return data[i * d + j]; }
  float at(std::size_t i, std::size_t j) const { return data[i * d + j]; }
};

// Binary format, little-endian: magic 'EMB1', u32 n, u32 d, then n*d IEEE-754
// binary32 values row-major. A sidecar <path>.ids holds one sample id per
// line so misaligned manifests are caught early.
void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path,
                      const std::vector<std::string>& ids);

struct EmbeddingFile {
  EmbeddingMatrix matrix;
  std::vector<std::string> ids;
};

EmbeddingFile read_embeddings(const std::filesystem::path& path);

// Runs `command` through /bin/sh, writes one absolute image path per line to
// its stdin, and reads one embedding per line (space-separated decimals) from
// its stdout. Row order matches input order. Any protocol violation names the
// offending path.
EmbeddingMatrix external_extract(const std::string& command,
                                 const std::vector<std::string>& image_paths,
                                 double timeout_s);

struct SynthConfig {
  int k_classes = 4;
  int dim = 32;
  int n_per_class = 200;
  int n_hybrid = 40;
  double noise_sigma = 1.0;
  double mimic_shift = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthDataset {
  Taxonomy taxonomy;
  std::vector<SampleRecord> records;
  EmbeddingMatrix embeddings;
  // Ground-truth class means (per species), kept for verification.
  std::vector<std::vector<double>> means_a;
  std::vector<std::vector<double>> means_b;
};

// Two-species synthetic benchmark. Species "A": k Gaussian clusters with
// means on a hypersphere (radius 8*sigma, or 1 when sigma is 0) plus hybrids
// at parent-mean midpoints. Species "B" mimics A: the same classes with each
// mean displaced by a random direction of length mimic_shift. Per-species
// layout: k*n_per_class non-hybrids (class-major) followed by n_hybrid
// hybrids; species A first.
SynthDataset synth_dataset(const SynthConfig& cfg);

}  // namespace hybridet
