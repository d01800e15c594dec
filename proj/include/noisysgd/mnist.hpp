#pragma once

// IDX reader for the MNIST files.
//
// labels: [0x00000801][count][count x u8]
// images: [0x00000803][count][rows][cols][count x rows x cols u8]
// All header integers are 32-bit big-endian. Pixels are scaled to [0, 1].

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "noisysgd/data.hpp"
#include "noisysgd/error.hpp"

namespace noisysgd {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& path) {
  if (offset + 4 > buf.size()) throw FormatError("'" + path + "': truncated header");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace detail

inline std::vector<int> read_idx_labels(const std::string& path) {
  const auto buf = detail::read_file_bytes(path);
  const std::uint32_t magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxLabelMagic) {
    throw FormatError("'" + path + "': bad label magic " + std::to_string(magic));
  }
  const std::uint32_t count = detail::read_be32(buf, 4, path);
  if (buf.size() < 8 + std::size_t{count}) {
    throw FormatError("'" + path + "': truncated, header says " + std::to_string(count) + " labels");
  }
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    labels[i] = buf[8 + i];
    if (labels[i] > 9) throw FormatError("'" + path + "': label out of range");
  }
  return labels;
}

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Vector> images;
};

inline IdxImages read_idx_images(const std::string& path, std::optional<std::size_t> limit) {
  const auto buf = detail::read_file_bytes(path);
  const std::uint32_t magic = detail::read_be32(buf, 0, path);
  if (magic != kIdxImageMagic) {
    throw FormatError("'" + path + "': bad image magic " + std::to_string(magic));
  }
  const std::size_t count = detail::read_be32(buf, 4, path);
  IdxImages out;
  out.rows = detail::read_be32(buf, 8, path);
  out.cols = detail::read_be32(buf, 12, path);
  const std::size_t pixels = out.rows * out.cols;
  if (pixels == 0) throw FormatError("'" + path + "': zero-sized images");
  if (buf.size() < 16 + count * pixels) {
    throw FormatError("'" + path + "': truncated, header says " + std::to_string(count) + " images");
  }
  const std::size_t n = limit ? std::min(*limit, count) : count;
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> px(pixels);
    const unsigned char* src = buf.data() + 16 + i * pixels;
    for (std::size_t j = 0; j < pixels; ++j) px[j] = src[j] / 255.0;
    out.images.emplace_back(std::move(px));
  }
  return out;
}

/// Loads the first `limit` samples (all when absent), in file order.
inline LabeledDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                                     std::optional<std::size_t> limit = std::nullopt) {
  auto labels = read_idx_labels(labels_path);
  auto images = read_idx_images(images_path, std::nullopt);
  if (images.images.size() != labels.size()) {
    throw FormatError("MNIST count mismatch: " + std::to_string(images.images.size()) +
                      " images vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = limit ? std::min(*limit, labels.size()) : labels.size();
  LabeledDataset ds;
  ds.kind = LabelKind::Multiclass;
  ds.num_classes = 10;
  ds.name = "mnist";
  ds.inputs.assign(std::make_move_iterator(images.images.begin()),
                   std::make_move_iterator(images.images.begin() + static_cast<std::ptrdiff_t>(n)));
  ds.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return ds;
}

inline constexpr const char* kDataDirEnv = "NOISYSGD_DATA_DIR";

struct MnistPaths {
  std::string train_images, train_labels, test_images, test_labels;
};

/// Standard file names under `dir`, or under $NOISYSGD_DATA_DIR when `dir` is empty.
inline std::optional<MnistPaths> mnist_paths(std::string dir = {}) {
  if (dir.empty()) {
    const char* env = std::getenv(kDataDirEnv);
    if (env == nullptr || *env == '\0') return std::nullopt;
    dir = env;
  }
  const std::filesystem::path base(dir);
  MnistPaths p{(base / "train-images-idx3-ubyte").string(), (base / "train-labels-idx1-ubyte").string(),
               (base / "t10k-images-idx3-ubyte").string(), (base / "t10k-labels-idx1-ubyte").string()};
  for (const auto* f : {&p.train_images, &p.train_labels, &p.test_images, &p.test_labels}) {
    if (!std::filesystem::exists(*f)) return std::nullopt;
  }
  return p;
}

}  // namespace noisysgd
