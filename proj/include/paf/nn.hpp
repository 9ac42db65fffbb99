#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace paf::nn {

enum class Activation { Tanh, Relu };

struct DenseSpec {
  int in = 0;
  int out = 0;
};
struct Conv2dSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  int stride = 1;
};
struct ActSpec {
  Activation fn = Activation::Tanh;
};
struct FlattenSpec {};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, ActSpec, FlattenSpec>;

struct TensorShape {
  int ch = 1;
  int h = 1;
  int w = 1;
  int size() const { return ch * h * w; }
  bool operator==(const TensorShape&) const = default;
};

// Fixed-topology network over f32 parameters stored in one contiguous array.
// Reductions accumulate in f64. Forward/backward are deterministic and
// read-only on parameters, so frozen networks are safe to share across
// threads.
class Network {
 public:
  Network(TensorShape input, std::vector<LayerSpec> layers);

  static Network mlp(int in, const std::vector<int>& hidden, int out,
                     Activation act = Activation::Tanh);

  // LeCun-style uniform init: U(-sqrt(3/fan_in), sqrt(3/fan_in)) * scale,
  // biases zero. scale 0 zeroes everything.
  void init_params(std::uint64_t seed, float scale = 1.0f);

  std::size_t param_count() const { return params_.size(); }
  std::span<float> params() { return params_; }
  std::span<const float> params() const { return params_; }
  std::span<float> layer_params(std::size_t layer);  // empty for parameterless layers

  const TensorShape& input_shape() const { return input_shape_; }
  const TensorShape& output_shape() const { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  std::vector<float> forward(std::span<const float> input) const;

  struct Cache {
    // acts[i] is the input of layer i; acts[layers.size()] is the output.
    std::vector<std::vector<float>> acts;
  };
  std::vector<float> forward_cached(std::span<const float> input, Cache& cache) const;

  // Accumulates (+=) parameter gradients into dparams given the upstream
  // gradient dout; when din is nonempty it receives the input gradient.
  // Requires a cache produced by forward_cached.
  void backward(const Cache& cache, std::span<const float> dout, std::span<float> dparams,
                std::span<float> din = {}) const;

  // Structured-text description (one line per layer), parseable back.
  std::string spec_text() const;
  static Network from_spec_text(const std::string& text);

 private:
  TensorShape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<TensorShape> shapes_;        // shapes_[i] = output shape of layer i-1
  std::vector<std::size_t> param_offset_;  // per layer
  std::vector<float> params_;
};

struct AdamConfig {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg);
  AdamConfig config;
  std::vector<float> m, v;
  long step = 0;
};

// Standard Adam update with bias correction; params and grads must align
// with the state vectors.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state);

}  // namespace paf::nn
