#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "feddiv/tensor.hpp"

namespace feddiv::data {

// Labelled images in NCHW layout with pixel values in [0, 1].
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  int class_count = 0;

  std::size_t size() const noexcept { return labels.size(); }
  // (C, H, W) of one image.
  Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
  std::size_t image_size() const { return shape_size(image_shape()); }
};

// Checks rank, label range and counts. Pixel range is checked only when
// `check_range` is set.
void validate(const Dataset& dataset, bool check_range = true);

// Copies the selected samples in the given order.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

// Stacks the selected images into a (n, C, H, W) batch.
Tensor gather_images(const Dataset& dataset, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const Dataset& dataset, std::span<const std::size_t> indices);

// Indices of all samples with the given label, ascending.
std::vector<std::size_t> class_indices(const Dataset& dataset, int label);

// Reads an IDX image file (magic 0x803) and label file (magic 0x801).
// Gzip-compressed files are decompressed transparently. Pixels are scaled
// by 1/255 and class_count is 1 + the largest label.
//
// Throws FormatError with kind bad_magic, truncated or count_mismatch, and
// IoError when a file cannot be opened.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

// Flat binary blob: float64 little-endian images followed by int32
// little-endian labels. The sidecar `<path>.json` records shape, class_count
// and any caller metadata under "meta".
void write_blob(const Dataset& dataset, const std::filesystem::path& path,
                const nlohmann::json& meta = nlohmann::json::object());
Dataset read_blob(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace feddiv::data
