#pragma once

#include <srt/datasets/io.hpp>
#include <srt/datasets/labeled_dataset.hpp>
#include <srt/errors.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace srt {

// IDX layout: 00 00 <type> <ndim>, then ndim big-endian uint32 sizes, then the
// payload. Only unsigned-byte payloads (type 0x08) are supported: 1-d label
// arrays and 3-d image stacks.

struct IdxLabels {
  std::vector<int> labels;
};

template <typename Feature = double>
struct IdxImages {
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  Matrix<Feature> pixels;  ///< one image per row, scaled to [0, 1]
};

template <typename Feature = double>
using IdxContents = std::variant<IdxLabels, IdxImages<Feature>>;

namespace detail {

inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

inline void write_be32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace detail

template <typename Feature = double>
IdxContents<Feature> parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw FormatError("idx: expected at least 4 header bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("idx: bad magic (first two bytes must be 00 00)");
  if (bytes[2] != 0x08) {
    throw FormatError("idx: unsupported type code " + std::to_string(bytes[2]) + " (expected 8, unsigned byte)");
  }
  const std::size_t ndim = bytes[3];
  if (ndim != 1 && ndim != 3) {
    throw FormatError("idx: unsupported dimension count " + std::to_string(ndim) + " (expected 1 or 3)");
  }
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() < header) {
    throw FormatError("idx: expected " + std::to_string(header) + " header bytes, got " +
                      std::to_string(bytes.size()));
  }
  std::vector<std::size_t> dims(ndim);
  std::size_t payload = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = detail::read_be32(bytes, 4 + 4 * i);
    if (dims[i] == 0) throw FormatError("idx: dimension " + std::to_string(i) + " is zero");
    payload *= dims[i];
  }
  const std::size_t actual = bytes.size() - header;
  if (actual != payload) {
    throw FormatError("idx: header promises " + std::to_string(payload) + " payload bytes, got " +
                      std::to_string(actual));
  }
  const auto data = bytes.subspan(header);
  if (ndim == 1) {
    return IdxLabels{std::vector<int>(data.begin(), data.end())};
  }
  const std::size_t pixels_per_image = dims[1] * dims[2];
  std::vector<Feature> pixels(payload);
  for (std::size_t i = 0; i < payload; ++i) pixels[i] = static_cast<Feature>(data[i] / 255.0);
  return IdxImages<Feature>{dims[1], dims[2], Matrix<Feature>(dims[0], pixels_per_image, std::move(pixels))};
}

inline Bytes encode_idx_labels(std::span<const std::uint8_t> labels) {
  Bytes out{0, 0, 0x08, 1};
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

inline Bytes encode_idx_images(std::size_t count, std::size_t rows, std::size_t cols,
                               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != count * rows * cols) throw DimensionError("encode_idx_images: pixel count mismatch");
  Bytes out{0, 0, 0x08, 3};
  detail::write_be32(out, static_cast<std::uint32_t>(count));
  detail::write_be32(out, static_cast<std::uint32_t>(rows));
  detail::write_be32(out, static_cast<std::uint32_t>(cols));
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

/// Loads an image/label IDX pair (each plain or gzip) into a classification dataset.
/// `num_classes` defaults to the largest label plus one.
template <typename Feature = double>
LabeledDataset<Feature> load_idx_dataset(const std::filesystem::path& images_path,
                                         const std::filesystem::path& labels_path,
                                         std::optional<int> num_classes = std::nullopt) {
  auto images = parse_idx<Feature>(read_data_file(images_path));
  auto labels = parse_idx<Feature>(read_data_file(labels_path));
  auto* img = std::get_if<IdxImages<Feature>>(&images);
  auto* lab = std::get_if<IdxLabels>(&labels);
  if (img == nullptr) throw FormatError("idx: '" + images_path.string() + "' is not a 3-d image file");
  if (lab == nullptr) throw FormatError("idx: '" + labels_path.string() + "' is not a 1-d label file");
  if (img->pixels.rows() != lab->labels.size()) {
    throw FormatError("idx: " + std::to_string(img->pixels.rows()) + " images but " +
                      std::to_string(lab->labels.size()) + " labels");
  }
  int classes = 0;
  for (int l : lab->labels) classes = std::max(classes, l + 1);
  LabeledDataset<Feature> data{std::move(img->pixels), std::move(lab->labels),
                               num_classes.value_or(std::max(classes, 2))};
  data.validate();
  return data;
}

}  // namespace srt
