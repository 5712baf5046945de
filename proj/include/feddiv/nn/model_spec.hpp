#pragma once

#include <string>
#include <variant>
#include <vector>

#include "feddiv/tensor.hpp"

namespace feddiv::nn {

// y = W x + b with W of shape (out_dim, in_dim).
struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
};

// Weight shape (out_ch, in_ch, kernel, kernel); symmetric zero padding.
struct Conv2dLayer {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  // "same" padding for odd kernels: (kernel - 1) / 2.
  static Conv2dLayer same(int in_ch, int out_ch, int kernel, int stride = 1) {
    return {in_ch, out_ch, kernel, stride, (kernel - 1) / 2};
  }
};

struct ReluLayer {};

// No padding; ties resolve to the first position in row-major window order.
struct MaxPool2dLayer {
  int kernel = 2;
  int stride = 2;
};

struct GlobalAvgPoolLayer {};

struct FlattenLayer {};

// y = skip(x) + relu(conv2(relu(conv1(x)))), both convs 3x3 with padding 1;
// conv1 carries the stride. skip is the identity unless in_ch != out_ch or
// stride != 1, in which case it is a strided 1x1 projection conv.
struct ResidualBlockLayer {
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;

  bool has_projection() const { return in_ch != out_ch || stride != 1; }
};

enum class LayerType { dense, conv2d, relu, maxpool2d, global_avg_pool, flatten, residual_block };

using LayerOp = std::variant<DenseLayer, Conv2dLayer, ReluLayer, MaxPool2dLayer,
                             GlobalAvgPoolLayer, FlattenLayer, ResidualBlockLayer>;

struct LayerSpec {
  std::string name;
  LayerOp op;

  LayerType type() const { return static_cast<LayerType>(op.index()); }
  bool has_parameters() const;
};

const char* layer_type_name(LayerType type);
// Inverse of layer_type_name; throws ValidationError for unknown names.
LayerType parse_layer_type(const std::string& name);

struct ModelSpec {
  // (channels, height, width) for image models or (features) for flat input.
  Shape input_shape;
  std::vector<LayerSpec> layers;
  int num_classes = 0;
};

// Per-layer output shapes (no batch axis). Throws ShapeError naming the first
// incompatible layer and ValidationError for bad hyperparameters.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

// Hyperparameters, unique names and shape chain, without the classifier check.
void validate_structure(const ModelSpec& spec);

// validate_structure plus: final output is (num_classes).
void validate(const ModelSpec& spec);

// Indices of layers that own parameters, ascending.
std::vector<int> parameterized_layers(const ModelSpec& spec);

// Fills empty layer names with "<index>_<type>".
void assign_default_names(ModelSpec& spec);

}  // namespace feddiv::nn
