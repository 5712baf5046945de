#include "feddiv/data/dataset.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace feddiv::data {
namespace {

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) : path_(path.string()) {
    file_ = gzopen(path_.c_str(), "rb");
    if (file_ == nullptr) throw IoError("cannot open file", path_);
    gzbuffer(file_, 1 << 16);
  }
  ~GzReader() { gzclose(file_); }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  // Reads exactly n bytes or throws a truncation error.
  void read(void* out, std::size_t n, const char* what) {
    auto* dst = static_cast<unsigned char*>(out);
    while (n > 0) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(file_, dst, chunk);
      if (got < 0) throw IoError("read failed", path_);
      if (got == 0) throw FormatError(ErrorKind::truncated, std::string("file ends inside ") + what, path_);
      dst += got;
      n -= static_cast<std::size_t>(got);
    }
  }

  std::uint32_t read_be32(const char* what) {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4, what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  gzFile file_;
};

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x, expected 0x%08x", got, want);
    throw FormatError(ErrorKind::bad_magic, buf, path);
  }
}

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

}  // namespace

void validate(const Dataset& dataset, bool check_range) {
  if (dataset.images.rank() != 4)
    throw ShapeError("dataset images must be (N, C, H, W), got " + shape_to_string(dataset.images.shape()));
  if (dataset.images.dim(0) != dataset.labels.size())
    throw ShapeError("dataset has " + std::to_string(dataset.images.dim(0)) + " images but " +
                     std::to_string(dataset.labels.size()) + " labels");
  if (dataset.class_count < 1) throw ValidationError("class_count must be >= 1");
  for (std::size_t i = 0; i < dataset.labels.size(); ++i)
    if (dataset.labels[i] < 0 || dataset.labels[i] >= dataset.class_count)
      throw ValidationError("label " + std::to_string(dataset.labels[i]) + " at index " + std::to_string(i) +
                            " outside [0, " + std::to_string(dataset.class_count) + ")");
  if (check_range)
    for (double v : dataset.images.values())
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("pixel value outside [0, 1]");
}

Tensor gather_images(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ValidationError("cannot gather an empty batch");
  const std::size_t stride = dataset.image_size();
  Shape shape = dataset.images.shape();
  shape[0] = indices.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dataset.size())
      throw ValidationError("sample index " + std::to_string(indices[i]) + " out of range");
    std::memcpy(out.data() + i * stride, dataset.images.data() + indices[i] * stride, stride * sizeof(double));
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dataset.labels.at(i));
  return out;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  return {gather_images(dataset, indices), gather_labels(dataset, indices), dataset.class_count};
}

std::vector<std::size_t> class_indices(const Dataset& dataset, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.labels.size(); ++i)
    if (dataset.labels[i] == label) out.push_back(i);
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  GzReader images(images_path);
  check_magic(images.read_be32("header"), 0x803, images.path());
  const std::size_t n = images.read_be32("header");
  const std::size_t rows = images.read_be32("header");
  const std::size_t cols = images.read_be32("header");

  GzReader labels(labels_path);
  check_magic(labels.read_be32("header"), 0x801, labels.path());
  const std::size_t n_labels = labels.read_be32("header");
  if (n != n_labels)
    throw FormatError(ErrorKind::count_mismatch,
                      std::to_string(n) + " images but " + std::to_string(n_labels) + " labels",
                      labels.path());
  if (n == 0 || rows == 0 || cols == 0) throw FormatError(ErrorKind::truncated, "empty IDX file", images.path());

  std::vector<unsigned char> pixels(n * rows * cols);
  images.read(pixels.data(), pixels.size(), "pixel data");
  std::vector<unsigned char> raw_labels(n);
  labels.read(raw_labels.data(), n, "label data");

  Dataset out;
  out.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < pixels.size(); ++i) out.images[i] = pixels[i] / 255.0;
  out.labels.assign(raw_labels.begin(), raw_labels.end());
  int max_label = 0;
  for (int l : out.labels) max_label = std::max(max_label, l);
  out.class_count = max_label + 1;
  return out;
}

void write_blob(const Dataset& dataset, const std::filesystem::path& path, const nlohmann::json& meta) {
  validate(dataset, false);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create file", path.string());
    out.write(reinterpret_cast<const char*>(dataset.images.data()),
              static_cast<std::streamsize>(dataset.images.size() * sizeof(double)));
    std::vector<std::int32_t> labels(dataset.labels.begin(), dataset.labels.end());
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    if (!out) throw IoError("write failed", path.string());
  }
  nlohmann::json header = {{"format", "f64le-images+i32le-labels"},
                           {"shape", dataset.images.shape()},
                           {"class_count", dataset.class_count},
                           {"meta", meta}};
  std::ofstream side(path.string() + ".json");
  if (!side) throw IoError("cannot create file", path.string() + ".json");
  side << header.dump(2) << '\n';
}

Dataset read_blob(const std::filesystem::path& path, nlohmann::json* meta) {
  const std::string side_path = path.string() + ".json";
  std::ifstream side(side_path);
  if (!side) throw IoError("cannot open file", side_path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ErrorKind::validation, e.what(), side_path);
  }
  Shape shape;
  int class_count = 0;
  try {
    shape = header.at("shape").get<Shape>();
    class_count = header.at("class_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ErrorKind::validation, e.what(), side_path);
  }
  if (shape.size() != 4) throw FormatError(ErrorKind::validation, "shape must have 4 dimensions", side_path);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path.string());
  Dataset out;
  out.images = Tensor(shape);
  out.class_count = class_count;
  in.read(reinterpret_cast<char*>(out.images.data()),
          static_cast<std::streamsize>(out.images.size() * sizeof(double)));
  std::vector<std::int32_t> labels(shape[0]);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
  if (!in) throw FormatError(ErrorKind::truncated, "blob shorter than its header says", path.string());
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(ErrorKind::count_mismatch, "blob longer than its header says", path.string());
  out.labels.assign(labels.begin(), labels.end());
  validate(out, false);
  if (meta != nullptr) *meta = header.value("meta", nlohmann::json::object());
  return out;
}

}  // namespace feddiv::data
