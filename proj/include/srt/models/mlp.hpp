#pragma once

#include <srt/datasets/labeled_dataset.hpp>
#include <srt/models/objective.hpp>
#include <srt/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace srt {

/// Batch mean of per-sample gradient squared norms for a stack of affine layers,
/// computed from the layer inputs and backpropagated deltas alone.
///
/// For sample i and layer l the weight gradient is the outer product
/// delta_i x_i^T, whose squared Frobenius norm is ||delta_i||^2 ||x_i||^2; the
/// bias gradient contributes ||delta_i||^2. `layer_inputs[l]` and
/// `layer_deltas[l]` hold one row per sample.
inline double per_sample_sq_norm_mlp(std::span<const DenseMatrix> layer_inputs,
                                     std::span<const DenseMatrix> layer_deltas) {
  if (layer_inputs.size() != layer_deltas.size() || layer_inputs.empty()) {
    throw DimensionError("per_sample_sq_norm_mlp: need one input and one delta matrix per layer");
  }
  const std::size_t batch = layer_inputs[0].rows();
  for (std::size_t l = 0; l < layer_inputs.size(); ++l) {
    if (layer_inputs[l].rows() != batch || layer_deltas[l].rows() != batch) {
      throw DimensionError("per_sample_sq_norm_mlp: layer " + std::to_string(l) + " row count differs from batch " +
                           std::to_string(batch));
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    double sample = 0.0;
    for (std::size_t l = 0; l < layer_inputs.size(); ++l) {
      const double delta_sq = squared_norm<double>(layer_deltas[l].row(i));
      sample += delta_sq * (squared_norm<double>(layer_inputs[l].row(i)) + 1.0);
    }
    total += sample;
  }
  return total / static_cast<double>(batch);
}

/// Feed-forward classifier: affine layers with ReLU between them, softmax
/// cross-entropy on the output. Each layer stores its weights (out x in,
/// row-major) followed by its bias. The optional L2 term (lambda/2) sum ||W||^2
/// covers weights only.
template <typename Feature = double>
class Mlp {
 public:
  Mlp(ModelSpec spec, const LabeledDataset<Feature>& data) : spec_(std::move(spec)), data_(&data), all_(data.size()) {
    spec_.validate();
    data.validate();
    if (spec_.kind != ModelKind::mlp) throw ParameterError("Mlp: spec kind must be mlp");
    if (spec_.input_dim != data.dimension()) {
      throw DimensionError("Mlp: input_dim " + std::to_string(spec_.input_dim) + " but data has " +
                           std::to_string(data.dimension()) + " features");
    }
    if (static_cast<std::size_t>(data.num_classes) > spec_.output_dim) {
      throw DimensionError("Mlp: output_dim " + std::to_string(spec_.output_dim) + " smaller than class count " +
                           std::to_string(data.num_classes));
    }
    const auto widths = spec_.layer_widths();
    std::size_t offset = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) {
      Layer layer{widths[l - 1], widths[l], offset, offset + widths[l] * widths[l - 1]};
      offset = layer.bias_offset + layer.out;
      layers_.push_back(layer);
    }
    std::iota(all_.begin(), all_.end(), std::size_t{0});
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t parameter_count() const noexcept { return layers_.back().bias_offset + layers_.back().out; }
  std::size_t sample_count() const noexcept { return data_->size(); }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  /// He-uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  DenseVector initialize(Rng& rng) const {
    DenseVector w(parameter_count());
    for (const Layer& layer : layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
      for (std::size_t k = 0; k < layer.out * layer.in; ++k) w[layer.weight_offset + k] = rng.uniform(-limit, limit);
    }
    return w;
  }

  double evaluate_loss(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    Workspace ws = workspace();
    double sum = 0.0;
    for (std::size_t i : batch) sum += forward(w, i, ws);
    return sum / static_cast<double>(batch.size()) + penalty(w);
  }

  BatchEvaluation evaluate_batch(const DenseVector& w, std::span<const std::size_t> batch) const {
    detail::check_call(parameter_count(), sample_count(), w, batch);
    const std::size_t m = batch.size();
    std::vector<DenseMatrix> inputs;
    std::vector<DenseMatrix> deltas;
    for (const Layer& layer : layers_) {
      inputs.emplace_back(m, layer.in);
      deltas.emplace_back(m, layer.out);
    }
    std::vector<double> weight_sq(layers_.size(), 0.0);
    if (spec_.l2_penalty > 0.0) {
      for (std::size_t l = 0; l < layers_.size(); ++l) weight_sq[l] = squared_norm<double>(weights(w, l));
    }

    DenseVector grad(parameter_count());
    Workspace ws = workspace();
    double loss_sum = 0.0;
    double penalty_cross = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      loss_sum += forward(w, batch[r], ws);
      backward(w, batch[r], ws);
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const auto x = ws.activations[l];
        const auto delta = ws.deltas[l];
        std::copy(x.begin(), x.end(), inputs[l].row(r).begin());
        std::copy(delta.begin(), delta.end(), deltas[l].row(r).begin());
        double* gw = grad.data() + layer.weight_offset;
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double d = delta[o];
          if (d == 0.0) continue;
          double* row = gw + o * layer.in;
          for (std::size_t k = 0; k < layer.in; ++k) row[k] += d * x[k];
          grad[layer.bias_offset + o] += d;
        }
        if (spec_.l2_penalty > 0.0) {
          // delta^T W x = delta . (z - b)
          const auto z = ws.preactivations[l];
          double s = 0.0;
          for (std::size_t o = 0; o < layer.out; ++o) s += delta[o] * (z[o] - w[layer.bias_offset + o]);
          penalty_cross += 2.0 * spec_.l2_penalty * s;
        }
      }
    }
    const double md = static_cast<double>(m);
    for (double& g : grad) g /= md;
    double mean_sq = per_sample_sq_norm_mlp(inputs, deltas);
    if (spec_.l2_penalty > 0.0) {
      const double lambda = spec_.l2_penalty;
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        axpy_into<double>(lambda, weights(w, l), grad.span().subspan(layer.weight_offset, layer.out * layer.in));
        mean_sq += lambda * lambda * weight_sq[l];
      }
      mean_sq += penalty_cross / md;
    }
    if (m == 1) mean_sq = squared_norm(grad);  // a single sample's gradient is the batch gradient
    return {loss_sum / md + penalty(w), std::move(grad), mean_sq, m};
  }

  double full_loss(const DenseVector& w) const { return evaluate_loss(w, all_); }

  /// Pre-activations of every layer for one sample (used to keep gradient checks away from ReLU kinks).
  std::vector<std::vector<double>> preactivations(const DenseVector& w, std::size_t sample) const {
    Workspace ws = workspace();
    forward(w, sample, ws);
    return ws.preactivations;
  }

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  struct Workspace {
    std::vector<std::vector<double>> activations;     // input of layer l
    std::vector<std::vector<double>> preactivations;  // z of layer l
    std::vector<std::vector<double>> deltas;          // d f_i / d z of layer l
  };

  Workspace workspace() const {
    Workspace ws;
    for (const Layer& layer : layers_) {
      ws.activations.emplace_back(layer.in);
      ws.preactivations.emplace_back(layer.out);
      ws.deltas.emplace_back(layer.out);
    }
    return ws;
  }

  std::span<const double> weights(const DenseVector& w, std::size_t l) const {
    return w.span().subspan(layers_[l].weight_offset, layers_[l].out * layers_[l].in);
  }

  /// Returns the cross-entropy loss of one sample, filling activations and pre-activations.
  double forward(const DenseVector& w, std::size_t sample, Workspace& ws) const {
    const auto x = data_->sample(sample);
    std::transform(x.begin(), x.end(), ws.activations[0].begin(), [](Feature v) { return static_cast<double>(v); });
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      const std::span<const double> input = ws.activations[l];
      auto& z = ws.preactivations[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        z[o] = dot<double, double>(w.span().subspan(layer.weight_offset + o * layer.in, layer.in), input) +
               w[layer.bias_offset + o];
      }
      if (l + 1 < layers_.size()) {
        auto& next = ws.activations[l + 1];
        for (std::size_t o = 0; o < layer.out; ++o) next[o] = z[o] > 0.0 ? z[o] : 0.0;
      }
    }
    const auto& logits = ws.preactivations.back();
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - top);
    return top + std::log(sum) - logits[static_cast<std::size_t>(data_->labels[sample])];
  }

  /// Fills per-layer deltas; requires a preceding forward() on the same sample.
  void backward(const DenseVector& w, std::size_t sample, Workspace& ws) const {
    const auto& logits = ws.preactivations.back();
    auto& top_delta = ws.deltas.back();
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t o = 0; o < logits.size(); ++o) {
      top_delta[o] = std::exp(logits[o] - top);
      sum += top_delta[o];
    }
    for (double& v : top_delta) v /= sum;
    top_delta[static_cast<std::size_t>(data_->labels[sample])] -= 1.0;

    for (std::size_t l = layers_.size() - 1; l > 0; --l) {
      const Layer& layer = layers_[l];
      const auto& delta = ws.deltas[l];
      auto& below = ws.deltas[l - 1];
      const auto& z_below = ws.preactivations[l - 1];
      std::fill(below.begin(), below.end(), 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w.data() + layer.weight_offset + o * layer.in;
        for (std::size_t k = 0; k < layer.in; ++k) below[k] += row[k] * d;
      }
      for (std::size_t k = 0; k < below.size(); ++k) {
        if (!(z_below[k] > 0.0)) below[k] = 0.0;
      }
    }
  }

  double penalty(const DenseVector& w) const {
    if (spec_.l2_penalty == 0.0) return 0.0;
    double sq = 0.0;
    for (std::size_t l = 0; l < layers_.size(); ++l) sq += squared_norm<double>(weights(w, l));
    return 0.5 * spec_.l2_penalty * sq;
  }

  ModelSpec spec_;
  const LabeledDataset<Feature>* data_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> all_;
};

}  // namespace srt
