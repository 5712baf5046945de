#pragma once

// Central-difference gradient oracle. Only uses the forward pass and the
// cross-entropy; it never touches the backward implementation.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "feddiv/nn/network.hpp"

namespace feddiv::testing {

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::string worst_tensor;
};

inline double loss_at(const nn::ModelSpec& spec, const nn::ParameterSet& params, const Tensor& batch,
                      std::span<const int> labels) {
  return nn::cross_entropy(nn::forward(spec, params, batch), labels);
}

inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn_ = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn_ += numeric[i] * numeric[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nn_));
  if (scale < 1e-10) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

// Per-tensor ||analytic - numeric|| / max(||analytic||, ||numeric||) over all
// parameter tensors, plus the input gradient.
inline GradCheckResult check_gradients(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                                       const Tensor& batch, std::span<const int> labels,
                                       double h = 1e-5) {
  const auto analytic = nn::loss_and_grad(spec, params, batch, labels, true);
  GradCheckResult result;
  auto record = [&](double err, const std::string& name) {
    if (err > result.worst_relative_error || result.worst_tensor.empty()) {
      result.worst_relative_error = std::max(err, result.worst_relative_error);
      result.worst_tensor = name;
    }
  };
  nn::ParameterSet probe = params;
  for (auto& [index, entries] : probe.layers()) {
    for (std::size_t t = 0; t < entries.size(); ++t) {
      auto& tensor = entries[t].tensor;
      std::vector<double> numeric(tensor.size());
      for (std::size_t j = 0; j < tensor.size(); ++j) {
        const double saved = tensor[j];
        tensor[j] = saved + h;
        const double up = loss_at(spec, probe, batch, labels);
        tensor[j] = saved - h;
        const double down = loss_at(spec, probe, batch, labels);
        tensor[j] = saved;
        numeric[j] = (up - down) / (2 * h);
      }
      const auto& a = analytic.grads.layer(index)[t].tensor;
      record(relative_error(a.values(), numeric),
             "layer " + std::to_string(index) + " " + entries[t].name);
    }
  }
  Tensor x = batch;
  std::vector<double> numeric(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const double up = loss_at(spec, params, x, labels);
    x[j] = saved - h;
    const double down = loss_at(spec, params, x, labels);
    x[j] = saved;
    numeric[j] = (up - down) / (2 * h);
  }
  record(relative_error(analytic.input_grad->values(), numeric), "input");
  return result;
}

}  // namespace feddiv::testing
