#include "saferl/nets.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "saferl/errors.hpp"

namespace saferl {

double softplus(double z) {
  // ln(1 + e^z) without overflow for large |z|.
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

MlpSpec MlpSpec::make(std::size_t input, std::vector<std::size_t> hidden,
                      std::vector<OutputHead> heads) {
  MlpSpec spec;
  spec.layer_sizes.push_back(input);
  for (std::size_t h : hidden) spec.layer_sizes.push_back(h);
  std::size_t out = 0;
  for (const auto& head : heads) out += head.size;
  spec.layer_sizes.push_back(out);
  spec.heads = std::move(heads);
  spec.validate();
  return spec;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw DomainError("MlpSpec: need at least input and output sizes");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw DomainError("MlpSpec: layer sizes must be positive");
  }
  std::size_t total = 0;
  for (const auto& head : heads) {
    if (head.size == 0) throw DomainError("MlpSpec: empty head " + head.name);
    total += head.size;
  }
  if (total != output_size()) {
    throw DomainError("MlpSpec: head sizes sum to " + std::to_string(total) +
                      " but output layer has " +
                      std::to_string(output_size()));
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  }
  return n;
}

std::size_t MlpSpec::head_offset(const std::string& name) const {
  std::size_t offset = 0;
  for (const auto& head : heads) {
    if (head.name == name) return offset;
    offset += head.size;
  }
  throw DomainError("MlpSpec: no head named " + name);
}

std::vector<LayerSlice> param_layout(const MlpSpec& spec) {
  spec.validate();
  std::vector<LayerSlice> layout;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    LayerSlice s;
    s.fan_in = spec.layer_sizes[l];
    s.fan_out = spec.layer_sizes[l + 1];
    s.weight_offset = offset;
    s.bias_offset = offset + s.fan_in * s.fan_out;
    offset = s.bias_offset + s.fan_out;
    layout.push_back(s);
  }
  return layout;
}

std::vector<DenseLayerParams> unflatten(const MlpSpec& spec,
                                        const ParamVector& params) {
  if (params.size() != spec.param_count()) {
    throw DimensionMismatch("unflatten: parameter count mismatch");
  }
  std::vector<DenseLayerParams> layers;
  for (const auto& s : param_layout(spec)) {
    DenseLayerParams layer;
    const auto w = params.values.begin() +
                   static_cast<std::ptrdiff_t>(s.weight_offset);
    const auto b = params.values.begin() +
                   static_cast<std::ptrdiff_t>(s.bias_offset);
    layer.weights.assign(w, w + static_cast<std::ptrdiff_t>(s.fan_in * s.fan_out));
    layer.bias.assign(b, b + static_cast<std::ptrdiff_t>(s.fan_out));
    layers.push_back(std::move(layer));
  }
  return layers;
}

ParamVector flatten(const MlpSpec& spec,
                    const std::vector<DenseLayerParams>& layers) {
  const auto layout = param_layout(spec);
  if (layers.size() != layout.size()) {
    throw DimensionMismatch("flatten: layer count mismatch");
  }
  ParamVector out;
  out.values.reserve(spec.param_count());
  for (std::size_t l = 0; l < layout.size(); ++l) {
    if (layers[l].weights.size() != layout[l].fan_in * layout[l].fan_out ||
        layers[l].bias.size() != layout[l].fan_out) {
      throw DimensionMismatch("flatten: layer shape mismatch");
    }
    out.values.insert(out.values.end(), layers[l].weights.begin(),
                      layers[l].weights.end());
    out.values.insert(out.values.end(), layers[l].bias.begin(),
                      layers[l].bias.end());
  }
  return out;
}

ParamVector glorot_init(const MlpSpec& spec, Rng& rng) {
  ParamVector p;
  p.values.assign(spec.param_count(), 0.0);
  for (const auto& s : param_layout(spec)) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    for (std::size_t i = 0; i < s.fan_in * s.fan_out; ++i) {
      p.values[s.weight_offset + i] = rng.uniform(-limit, limit);
    }
  }
  return p;
}

namespace {

// Four independent partial sums so the loop vectorizes; the summation order
// is fixed, so results stay deterministic.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Mlp::Mlp(MlpSpec spec)
    : spec_(std::move(spec)),
      layout_(param_layout(spec_)),
      param_count_(spec_.param_count()) {}

std::vector<double> Mlp::forward(std::span<const double> params,
                                 std::span<const double> input) const {
  ForwardTrace trace;
  forward(params, input, trace);
  return std::move(trace.output);
}

void Mlp::forward(std::span<const double> params,
                  std::span<const double> input, ForwardTrace& trace) const {
  if (params.size() != param_count_) {
    throw DimensionMismatch("Mlp::forward: expected " +
                            std::to_string(param_count_) + " parameters, got " +
                            std::to_string(params.size()));
  }
  if (input.size() != spec_.input_size()) {
    throw DimensionMismatch("Mlp::forward: expected input of size " +
                            std::to_string(spec_.input_size()) + ", got " +
                            std::to_string(input.size()));
  }
  const std::size_t n_layers = layout_.size();
  trace.activations.resize(n_layers);
  trace.activations[0].assign(input.begin(), input.end());

  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerSlice& s = layout_[l];
    const double* w = params.data() + s.weight_offset;
    const double* b = params.data() + s.bias_offset;
    const std::vector<double>& x = trace.activations[l];
    const bool last = (l + 1 == n_layers);
    std::vector<double>& z = last ? trace.pre_output : trace.activations[l + 1];
    z.resize(s.fan_out);
    for (std::size_t j = 0; j < s.fan_out; ++j) {
      const double acc = b[j] + dot(w + j * s.fan_in, x.data(), s.fan_in);
      z[j] = last ? acc : std::tanh(acc);
    }
  }

  trace.output.resize(spec_.output_size());
  std::size_t offset = 0;
  for (const auto& head : spec_.heads) {
    for (std::size_t k = offset; k < offset + head.size; ++k) {
      const double z = trace.pre_output[k];
      trace.output[k] =
          head.transform == HeadTransform::kSoftplusPlusOne ? softplus(z) + 1.0
                                                            : z;
    }
    offset += head.size;
  }
}

void Mlp::backward(std::span<const double> params, const ForwardTrace& trace,
                   std::span<const double> upstream,
                   std::span<double> grad) const {
  if (upstream.size() != spec_.output_size()) {
    throw DimensionMismatch("Mlp::backward: upstream size mismatch");
  }
  if (grad.size() != param_count_ || params.size() != param_count_) {
    throw DimensionMismatch("Mlp::backward: parameter size mismatch");
  }

  std::vector<double> delta(upstream.size());
  std::size_t offset = 0;
  for (const auto& head : spec_.heads) {
    for (std::size_t k = offset; k < offset + head.size; ++k) {
      delta[k] = head.transform == HeadTransform::kSoftplusPlusOne
                     ? upstream[k] * sigmoid(trace.pre_output[k])
                     : upstream[k];
    }
    offset += head.size;
  }

  std::vector<double> prev_delta;
  for (std::size_t l = layout_.size(); l-- > 0;) {
    const LayerSlice& s = layout_[l];
    const double* w = params.data() + s.weight_offset;
    double* gw = grad.data() + s.weight_offset;
    double* gb = grad.data() + s.bias_offset;
    const std::vector<double>& x = trace.activations[l];

    for (std::size_t j = 0; j < s.fan_out; ++j) {
      const double d = delta[j];
      gb[j] += d;
      if (d == 0.0) continue;
      double* grow = gw + j * s.fan_in;
      for (std::size_t i = 0; i < s.fan_in; ++i) grow[i] += d * x[i];
    }
    if (l == 0) break;

    // Propagate through the weights, then through tanh of layer l.
    prev_delta.assign(s.fan_in, 0.0);
    for (std::size_t j = 0; j < s.fan_out; ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      const double* row = w + j * s.fan_in;
      for (std::size_t i = 0; i < s.fan_in; ++i) prev_delta[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < s.fan_in; ++i) {
      prev_delta[i] *= 1.0 - x[i] * x[i];
    }
    delta.swap(prev_delta);
  }
}

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

// Eigen picks vectorized code paths (and with them the summation order) from
// operand alignment. Copying into Eigen-owned storage fixes the alignment, so
// results depend only on the values and shapes, not on where the caller's
// buffers happen to live.
RowMatrix owned(const double* data, std::size_t rows, std::size_t cols) {
  return ConstMatMap(data, static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

}  // namespace

void Mlp::forward_batch(std::span<const double> params,
                        std::span<const double> inputs, std::size_t rows,
                        BatchTrace& trace) const {
  if (params.size() != param_count_) {
    throw DimensionMismatch("Mlp::forward_batch: parameter count mismatch");
  }
  if (inputs.size() != rows * spec_.input_size()) {
    throw DimensionMismatch("Mlp::forward_batch: input size mismatch");
  }
  const std::size_t n_layers = layout_.size();
  trace.rows = rows;
  trace.activations.resize(n_layers);
  trace.activations[0].assign(inputs.begin(), inputs.end());

  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerSlice& s = layout_[l];
    const RowMatrix w = owned(params.data() + s.weight_offset, s.fan_out, s.fan_in);
    const RowMatrix x = owned(trace.activations[l].data(), rows, s.fan_in);
    const RowMatrix z = x * w.transpose();
    const double* b = params.data() + s.bias_offset;
    const bool last = (l + 1 == n_layers);
    std::vector<double>& out = last ? trace.pre_output : trace.activations[l + 1];
    out.resize(rows * s.fan_out);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < s.fan_out; ++j) {
        const double acc = z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) + b[j];
        out[r * s.fan_out + j] = last ? acc : std::tanh(acc);
      }
    }
  }

  const std::size_t width = spec_.output_size();
  trace.output.resize(rows * width);
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t offset = 0;
    for (const auto& head : spec_.heads) {
      for (std::size_t k = offset; k < offset + head.size; ++k) {
        const double z = trace.pre_output[row * width + k];
        trace.output[row * width + k] =
            head.transform == HeadTransform::kSoftplusPlusOne ? softplus(z) + 1.0
                                                              : z;
      }
      offset += head.size;
    }
  }
}

void Mlp::backward_batch(std::span<const double> params,
                         const BatchTrace& trace,
                         std::span<const double> upstream,
                         std::span<double> grad) const {
  const std::size_t rows = trace.rows;
  const std::size_t width = spec_.output_size();
  if (upstream.size() != rows * width) {
    throw DimensionMismatch("Mlp::backward_batch: upstream size mismatch");
  }
  if (grad.size() != param_count_ || params.size() != param_count_) {
    throw DimensionMismatch("Mlp::backward_batch: parameter size mismatch");
  }

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t offset = 0;
    for (const auto& head : spec_.heads) {
      if (head.transform == HeadTransform::kSoftplusPlusOne) {
        for (std::size_t k = offset; k < offset + head.size; ++k) {
          delta[row * width + k] *= sigmoid(trace.pre_output[row * width + k]);
        }
      }
      offset += head.size;
    }
  }

  for (std::size_t l = layout_.size(); l-- > 0;) {
    const LayerSlice& s = layout_[l];
    const RowMatrix d = owned(delta.data(), rows, s.fan_out);
    const RowMatrix x = owned(trace.activations[l].data(), rows, s.fan_in);
    const RowMatrix gw = d.transpose() * x;
    double* gw_out = grad.data() + s.weight_offset;
    double* gb_out = grad.data() + s.bias_offset;
    for (std::size_t j = 0; j < s.fan_out; ++j) {
      for (std::size_t i = 0; i < s.fan_in; ++i) {
        gw_out[j * s.fan_in + i] +=
            gw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < s.fan_out; ++j) gb_out[j] += delta[r * s.fan_out + j];
    }
    if (l == 0) break;

    // Propagate through the weights, then through tanh of layer l.
    const RowMatrix w = owned(params.data() + s.weight_offset, s.fan_out, s.fan_in);
    const RowMatrix p = d * w;
    delta.resize(rows * s.fan_in);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < s.fan_in; ++i) {
        const double a = trace.activations[l][r * s.fan_in + i];
        delta[r * s.fan_in + i] =
            p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) * (1.0 - a * a);
      }
    }
  }
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input) {
  return Mlp(spec).forward(params.values, input);
}

ParamVector mlp_backward(const MlpSpec& spec, const ParamVector& params,
                         std::span<const double> input,
                         std::span<const double> upstream) {
  const Mlp net(spec);
  ForwardTrace trace;
  net.forward(params.values, input, trace);
  ParamVector grad;
  grad.values.assign(net.param_count(), 0.0);
  net.backward(params.values, trace, upstream, grad.values);
  return grad;
}

}  // namespace saferl
