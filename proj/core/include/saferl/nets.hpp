#ifndef SAFERL_NETS_HPP_
#define SAFERL_NETS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "saferl/stochastics.hpp"

namespace saferl {

enum class Activation { kTanh };

enum class HeadTransform {
  kIdentity,
  // ln(1 + e^z) + 1, so every output exceeds 1.
  kSoftplusPlusOne,
};

struct OutputHead {
  std::string name;
  std::size_t size = 0;
  HeadTransform transform = HeadTransform::kIdentity;
};

struct MlpSpec {
  // input, hidden..., output
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::kTanh;
  std::vector<OutputHead> heads;

  // Fully connected net with tanh hidden layers and the given heads.
  static MlpSpec make(std::size_t input, std::vector<std::size_t> hidden,
                      std::vector<OutputHead> heads);

  void validate() const;
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  // Offset of head `name` in the flat output vector; throws if absent.
  std::size_t head_offset(const std::string& name) const;
};

// Where one dense layer's parameters live inside the flat vector. Weights are
// row-major with shape (fan_out, fan_in); biases follow the weights.
struct LayerSlice {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerSlice> param_layout(const MlpSpec& spec);

struct ParamVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ParamVector&) const = default;
};

// Structured view of the parameters of one dense layer.
struct DenseLayerParams {
  std::vector<double> weights;  // fan_out x fan_in, row-major
  std::vector<double> bias;     // fan_out
};

std::vector<DenseLayerParams> unflatten(const MlpSpec& spec,
                                        const ParamVector& params);
ParamVector flatten(const MlpSpec& spec,
                    const std::vector<DenseLayerParams>& layers);

// Glorot-uniform weights, zero biases.
ParamVector glorot_init(const MlpSpec& spec, Rng& rng);

// Everything the backward pass needs from a forward pass.
struct ForwardTrace {
  // activations[0] is the input; activations[l] the output of hidden layer l.
  std::vector<std::vector<double>> activations;
  std::vector<double> pre_output;  // last layer before head transforms
  std::vector<double> output;      // after head transforms
};

// Forward pass over `rows` inputs at once. Every matrix is row-major with one
// row per input.
struct BatchTrace {
  std::size_t rows = 0;
  std::vector<std::vector<double>> activations;
  std::vector<double> pre_output;
  std::vector<double> output;
};

class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t param_count() const { return param_count_; }

  std::vector<double> forward(std::span<const double> params,
                              std::span<const double> input) const;
  void forward(std::span<const double> params, std::span<const double> input,
               ForwardTrace& trace) const;

  // Adds d(upstream . output)/d(params) into grad (size param_count()).
  void backward(std::span<const double> params, const ForwardTrace& trace,
                std::span<const double> upstream,
                std::span<double> grad) const;

  // `inputs` holds rows x input_size() values.
  void forward_batch(std::span<const double> params,
                     std::span<const double> inputs, std::size_t rows,
                     BatchTrace& trace) const;
  // Adds the gradient of sum_r upstream[r] . output[r] into grad; `upstream`
  // is rows x output_size().
  void backward_batch(std::span<const double> params, const BatchTrace& trace,
                      std::span<const double> upstream,
                      std::span<double> grad) const;

 private:
  MlpSpec spec_;
  std::vector<LayerSlice> layout_;
  std::size_t param_count_ = 0;
};

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input);

ParamVector mlp_backward(const MlpSpec& spec, const ParamVector& params,
                         std::span<const double> input,
                         std::span<const double> upstream);

double softplus(double z);
double sigmoid(double z);

}  // namespace saferl

#endif  // SAFERL_NETS_HPP_
