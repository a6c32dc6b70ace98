#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dgkd/rng.hpp"
#include "dgkd/tensor.hpp"

namespace dgkd {

/// Labeled examples with disjoint train/test split tags.
///
/// inputs is [N, ...]; labels has N entries below num_classes. Image data is
/// [N,C,H,W]; the 2-D synthetic sets are [N,2].
struct LabeledDataset {
  Tensor inputs;
  std::vector<int> labels;
  int num_classes = 0;
  std::string id;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<double> channel_mean;    // per-channel normalization metadata
  std::vector<double> channel_stddev;  // (empty when not normalized)
  bool augment = false;

  std::size_t example_count() const { return labels.size(); }
  std::vector<std::size_t> item_shape() const;
  void validate() const;

  /// Copies the given rows into a fresh [B, ...] batch tensor.
  Tensor gather(std::span<const std::size_t> rows) const;
  std::vector<int> gather_labels(std::span<const std::size_t> rows) const;
};

enum class SyntheticKind { kSpiral, kBlobs };

struct SyntheticParams {
  int classes = 10;
  int train_per_class = 500;
  int test_per_class = 200;
  double noise = 0.2;
};

/// Deterministic 2-D datasets. Spirals interleave K arms around the origin
/// and need a nonlinear boundary; blobs are isotropic Gaussians on the unit
/// circle and are linearly separable at low noise.
LabeledDataset generate_synthetic_dataset(SyntheticKind kind,
                                          const SyntheticParams& params,
                                          std::uint64_t seed);

/// One split (images + labels) parsed from big-endian IDX files
/// (magic 0x00000803 for u8 rank-3 images, 0x00000801 for labels).
/// Pixels are scaled to [0,1]; images come out as [N,1,R,C].
LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path);

/// One split read from CIFAR binary files. Each record is one label byte
/// (coarse+fine pair for the 100-class layout; the fine label is used) plus
/// 3072 channel-major pixel bytes. Pixels are scaled to [0,1], [N,3,32,32].
LabeledDataset load_cifar_binary(const std::vector<std::filesystem::path>& paths,
                                 int num_classes);

/// Reads IDX image header dims without loading pixel data.
std::vector<std::size_t> peek_idx_image_shape(const std::filesystem::path& images_path);

/// Merges a train split and a test split into one tagged dataset.
LabeledDataset merge_splits(const LabeledDataset& train, const LabeledDataset& test,
                            const std::string& id);

/// Computes per-channel mean/stddev on the train split and standardizes all
/// examples in place, recording the statistics in the metadata fields.
void normalize_per_channel(LabeledDataset& dataset);

/// Random 4-pixel-pad crop plus horizontal flip for [B,C,H,W] batches.
Tensor augment_batch(const Tensor& batch, Rng& rng);

}  // namespace dgkd
