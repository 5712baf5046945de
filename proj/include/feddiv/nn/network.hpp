#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "feddiv/nn/model_spec.hpp"
#include "feddiv/nn/params.hpp"
#include "feddiv/tensor.hpp"

namespace feddiv::nn {

// Cached forward state needed by backward.
template <typename T>
struct BasicTrace {
  struct LayerCache {
    std::vector<std::size_t> argmax;  // maxpool2d: winning input offset per output
    BasicTensor<T> pre1;              // residual_block: conv1 output
    BasicTensor<T> pre2;              // residual_block: conv2 output
  };
  // activations[0] is the input batch; activations[i + 1] is layer i's output.
  std::vector<BasicTensor<T>> activations;
  std::vector<LayerCache> caches;
};

using Trace = BasicTrace<double>;

// Logits of shape (batch, num_classes). `batch` has shape (B, *input_shape).
template <typename T>
BasicTensor<T> forward(const ModelSpec& spec, const BasicParameterSet<T>& params,
                       const BasicTensor<T>& batch, BasicTrace<T>* trace = nullptr);

template <typename T>
struct BasicLossGrad {
  T loss = 0;
  BasicGradientSet<T> grads;
  BasicTensor<T> logits;
  std::optional<BasicTensor<T>> input_grad;
};

using LossGrad = BasicLossGrad<double>;

// Mean softmax cross-entropy over the batch and its exact gradient.
template <typename T>
BasicLossGrad<T> loss_and_grad(const ModelSpec& spec, const BasicParameterSet<T>& params,
                               const BasicTensor<T>& batch, std::span<const int> labels,
                               bool want_input_grad = false);

// Row-wise softmax of a (B, C) tensor.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// Mean cross-entropy of (B, C) logits against labels.
template <typename T>
T cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

// Row argmax; ties go to the lowest class index.
template <typename T>
std::vector<int> argmax_rows(const BasicTensor<T>& logits);

}  // namespace feddiv::nn
