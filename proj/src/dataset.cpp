#include "dgkd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dgkd/error.hpp"

namespace dgkd {

std::vector<std::size_t> LabeledDataset::item_shape() const {
  std::vector<std::size_t> s(inputs.shape().begin() + 1, inputs.shape().end());
  return s;
}

void LabeledDataset::validate() const {
  if (inputs.rank() < 2 || inputs.extent(0) != labels.size()) {
    throw StructuralError("dataset inputs " + shape_to_string(inputs.shape()) +
                          " do not match " + std::to_string(labels.size()) +
                          " labels");
  }
  if (num_classes < 2) throw StructuralError("dataset needs at least 2 classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw StructuralError("label " + std::to_string(y) + " out of range");
    }
  }
  std::set<std::size_t> seen;
  for (std::size_t i : train_indices) seen.insert(i);
  for (std::size_t i : test_indices) {
    if (seen.count(i)) {
      throw StructuralError("train/test splits overlap at index " + std::to_string(i));
    }
    seen.insert(i);
  }
  for (std::size_t i : seen) {
    if (i >= example_count()) {
      throw StructuralError("split index " + std::to_string(i) + " out of bounds");
    }
  }
}

Tensor LabeledDataset::gather(std::span<const std::size_t> rows) const {
  const std::size_t item = shape_size(item_shape());
  std::vector<std::size_t> shape = inputs.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double* src = inputs.data() + rows[r] * item;
    std::copy(src, src + item, out.data() + r * item);
  }
  return out;
}

std::vector<int> LabeledDataset::gather_labels(
    std::span<const std::size_t> rows) const {
  std::vector<int> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = labels[rows[r]];
  return out;
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

std::string format_noise(double noise) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", noise);
  return buf;
}

}  // namespace

LabeledDataset generate_synthetic_dataset(SyntheticKind kind,
                                          const SyntheticParams& params,
                                          std::uint64_t seed) {
  if (params.classes < 2) throw ParameterError("synthetic dataset needs >= 2 classes");
  if (params.train_per_class < 1 || params.test_per_class < 1) {
    throw ParameterError("per-class example counts must be positive");
  }
  if (params.noise < 0.0 || !std::isfinite(params.noise)) {
    throw ParameterError("noise must be nonnegative and finite");
  }
  const std::size_t k = static_cast<std::size_t>(params.classes);
  const std::size_t per_class =
      static_cast<std::size_t>(params.train_per_class + params.test_per_class);
  const std::size_t n = k * per_class;

  LabeledDataset ds;
  ds.inputs = Tensor({n, 2});
  ds.labels.resize(n);
  ds.num_classes = params.classes;
  Rng rng(derive_seed(seed, kind == SyntheticKind::kSpiral ? "spiral" : "blobs"));

  std::size_t row = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      double x, y;
      if (kind == SyntheticKind::kSpiral) {
        // Arm c sweeps 4 radians outward from its base angle; noise jitters
        // the angle so neighboring arms overlap as it grows.
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(per_class);
        const double radius = 0.1 + 0.9 * u;
        const double theta = kTwoPi * static_cast<double>(c) / static_cast<double>(k) +
                             4.0 * u + params.noise * rng.normal();
        x = radius * std::cos(theta);
        y = radius * std::sin(theta);
      } else {
        const double theta = kTwoPi * static_cast<double>(c) / static_cast<double>(k);
        x = std::cos(theta) + params.noise * rng.normal();
        y = std::sin(theta) + params.noise * rng.normal();
      }
      ds.inputs[row * 2] = x;
      ds.inputs[row * 2 + 1] = y;
      ds.labels[row] = static_cast<int>(c);
      if (i < static_cast<std::size_t>(params.train_per_class)) {
        ds.train_indices.push_back(row);
      } else {
        ds.test_indices.push_back(row);
      }
    }
  }
  ds.id = (kind == SyntheticKind::kSpiral ? "spiral" : "blobs") +
          std::to_string(params.classes) + "-n" + format_noise(params.noise) + "-s" +
          std::to_string(seed);
  ds.validate();
  return ds;
}

namespace {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_be_u32(const std::vector<unsigned char>& b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

std::vector<std::size_t> peek_idx_image_shape(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> header(16);
  if (!in.read(reinterpret_cast<char*>(header.data()), 16)) {
    throw DataFormatError("IDX file '" + path.string() + "' is truncated");
  }
  if (read_be_u32(header, 0) != kIdxImagesMagic) {
    throw DataFormatError("bad IDX image magic in '" + path.string() + "'");
  }
  return {read_be_u32(header, 4), 1, read_be_u32(header, 8), read_be_u32(header, 12)};
}

LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path) {
  const std::vector<unsigned char> img = read_file_bytes(images_path);
  const std::vector<unsigned char> lab = read_file_bytes(labels_path);
  if (img.size() < 16) {
    throw DataFormatError("IDX image file '" + images_path.string() + "' is truncated");
  }
  if (lab.size() < 8) {
    throw DataFormatError("IDX label file '" + labels_path.string() + "' is truncated");
  }
  if (read_be_u32(img, 0) != kIdxImagesMagic) {
    throw DataFormatError("bad IDX image magic in '" + images_path.string() + "'");
  }
  if (read_be_u32(lab, 0) != kIdxLabelsMagic) {
    throw DataFormatError("bad IDX label magic in '" + labels_path.string() + "'");
  }
  const std::size_t n_images = read_be_u32(img, 4);
  const std::size_t rows = read_be_u32(img, 8);
  const std::size_t cols = read_be_u32(img, 12);
  const std::size_t n_labels = read_be_u32(lab, 4);
  if (n_images != n_labels) {
    throw DataFormatError("IDX count mismatch: " + std::to_string(n_images) +
                          " images vs " + std::to_string(n_labels) + " labels");
  }
  if (n_images == 0 || rows == 0 || cols == 0) {
    throw DataFormatError("IDX file declares an empty dataset");
  }
  if (img.size() != 16 + n_images * rows * cols) {
    throw DataFormatError("IDX image file '" + images_path.string() +
                          "' is truncated or oversized");
  }
  if (lab.size() != 8 + n_labels) {
    throw DataFormatError("IDX label file '" + labels_path.string() +
                          "' is truncated or oversized");
  }

  LabeledDataset ds;
  ds.inputs = Tensor({n_images, 1, rows, cols});
  ds.labels.resize(n_images);
  int max_label = 0;
  for (std::size_t i = 0; i < n_images; ++i) {
    ds.labels[i] = static_cast<int>(lab[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  for (std::size_t i = 0; i < n_images * rows * cols; ++i) {
    ds.inputs[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  ds.num_classes = std::max(2, max_label + 1);
  ds.train_indices.resize(n_images);
  for (std::size_t i = 0; i < n_images; ++i) ds.train_indices[i] = i;
  ds.id = "idx:" + images_path.filename().string();
  ds.validate();
  return ds;
}

LabeledDataset load_cifar_binary(const std::vector<std::filesystem::path>& paths,
                                 int num_classes) {
  if (paths.empty()) throw ParameterError("no CIFAR files given");
  if (num_classes < 2 || num_classes > 256) {
    throw ParameterError("CIFAR num_classes must lie in [2,256]");
  }
  const std::size_t label_bytes = num_classes == 100 ? 2 : 1;
  const std::size_t record = label_bytes + 3072;

  std::vector<unsigned char> all;
  for (const auto& p : paths) {
    std::vector<unsigned char> bytes = read_file_bytes(p);
    if (bytes.empty() || bytes.size() % record != 0) {
      throw DataFormatError("CIFAR file '" + p.string() + "' size " +
                            std::to_string(bytes.size()) +
                            " is not a multiple of the record size " +
                            std::to_string(record));
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  const std::size_t n = all.size() / record;

  LabeledDataset ds;
  ds.inputs = Tensor({n, 3, 32, 32});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = all.data() + i * record;
    const int label = static_cast<int>(rec[label_bytes - 1]);  // fine label
    if (label >= num_classes) {
      throw DataFormatError("CIFAR record " + std::to_string(i) + " has label " +
                            std::to_string(label) + " >= num_classes " +
                            std::to_string(num_classes));
    }
    ds.labels[i] = label;
    double* dst = ds.inputs.data() + i * 3072;
    for (std::size_t j = 0; j < 3072; ++j) {
      dst[j] = static_cast<double>(rec[label_bytes + j]) / 255.0;
    }
  }
  ds.num_classes = num_classes;
  ds.train_indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.train_indices[i] = i;
  ds.id = "cifar:" + paths.front().filename().string();
  ds.validate();
  return ds;
}

LabeledDataset merge_splits(const LabeledDataset& train, const LabeledDataset& test,
                            const std::string& id) {
  if (train.item_shape() != test.item_shape()) {
    throw StructuralError("train/test item shapes differ: " +
                          shape_to_string(train.inputs.shape()) + " vs " +
                          shape_to_string(test.inputs.shape()));
  }
  const std::size_t n_train = train.example_count();
  const std::size_t n_test = test.example_count();
  std::vector<std::size_t> shape = train.inputs.shape();
  shape[0] = n_train + n_test;

  LabeledDataset ds;
  ds.inputs = Tensor(shape);
  std::copy(train.inputs.values().begin(), train.inputs.values().end(),
            ds.inputs.data());
  std::copy(test.inputs.values().begin(), test.inputs.values().end(),
            ds.inputs.data() + train.inputs.size());
  ds.labels = train.labels;
  ds.labels.insert(ds.labels.end(), test.labels.begin(), test.labels.end());
  ds.num_classes = std::max(train.num_classes, test.num_classes);
  ds.id = id;
  for (std::size_t i = 0; i < n_train; ++i) ds.train_indices.push_back(i);
  for (std::size_t i = 0; i < n_test; ++i) ds.test_indices.push_back(n_train + i);
  ds.validate();
  return ds;
}

void normalize_per_channel(LabeledDataset& dataset) {
  if (dataset.inputs.rank() != 4) {
    throw StructuralError("per-channel normalization needs [N,C,H,W] inputs");
  }
  if (dataset.train_indices.empty()) {
    throw StructuralError("per-channel normalization needs a train split");
  }
  const std::size_t channels = dataset.inputs.extent(1);
  const std::size_t plane = dataset.inputs.extent(2) * dataset.inputs.extent(3);
  std::vector<double> mean(channels, 0.0), var(channels, 0.0);
  const double count =
      static_cast<double>(dataset.train_indices.size() * plane);
  for (std::size_t idx : dataset.train_indices) {
    const double* item = dataset.inputs.data() + idx * channels * plane;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) mean[c] += item[c * plane + p];
    }
  }
  for (double& m : mean) m /= count;
  for (std::size_t idx : dataset.train_indices) {
    const double* item = dataset.inputs.data() + idx * channels * plane;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double d = item[c * plane + p] - mean[c];
        var[c] += d * d;
      }
    }
  }
  std::vector<double> stddev(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    stddev[c] = std::sqrt(var[c] / count);
    if (stddev[c] < 1e-12) stddev[c] = 1.0;  // constant channel
  }
  for (std::size_t i = 0; i < dataset.example_count(); ++i) {
    double* item = dataset.inputs.data() + i * channels * plane;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        item[c * plane + p] = (item[c * plane + p] - mean[c]) / stddev[c];
      }
    }
  }
  dataset.channel_mean = std::move(mean);
  dataset.channel_stddev = std::move(stddev);
}

Tensor augment_batch(const Tensor& batch, Rng& rng) {
  if (batch.rank() != 4) {
    throw StructuralError("augment_batch expects [B,C,H,W], got " +
                          shape_to_string(batch.shape()));
  }
  constexpr std::size_t kPad = 4;
  const std::size_t n = batch.extent(0), c = batch.extent(1);
  const std::size_t h = batch.extent(2), w = batch.extent(3);
  Tensor out(batch.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t dy = rng.uniform_index(2 * kPad + 1);
    const std::size_t dx = rng.uniform_index(2 * kPad + 1);
    const bool flip = rng.uniform_index(2) == 1;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = batch.data() + (b * c + ch) * h * w;
      double* dst = out.data() + (b * c + ch) * h * w;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          // Position in the zero-padded image, then back into source coords.
          const std::ptrdiff_t si =
              static_cast<std::ptrdiff_t>(i + dy) - static_cast<std::ptrdiff_t>(kPad);
          const std::size_t jj = flip ? (w - 1 - j) : j;
          const std::ptrdiff_t sj =
              static_cast<std::ptrdiff_t>(jj + dx) - static_cast<std::ptrdiff_t>(kPad);
          double v = 0.0;
          if (si >= 0 && si < static_cast<std::ptrdiff_t>(h) && sj >= 0 &&
              sj < static_cast<std::ptrdiff_t>(w)) {
            v = src[static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)];
          }
          dst[i * w + j] = v;
        }
      }
    }
  }
  return out;
}

}  // namespace dgkd
