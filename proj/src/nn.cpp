#include "paf/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf::nn {

namespace {

int conv_out(int in, int kernel, int stride) { return (in - kernel) / stride + 1; }

std::size_t layer_param_count(const LayerSpec& layer) {
  if (const auto* d = std::get_if<DenseSpec>(&layer)) {
    return static_cast<std::size_t>(d->out) * d->in + d->out;
  }
  if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
    return static_cast<std::size_t>(c->out_ch) * c->in_ch * c->kernel * c->kernel + c->out_ch;
  }
  return 0;
}

TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in, std::size_t index) {
  if (const auto* d = std::get_if<DenseSpec>(&layer)) {
    if (in.size() != d->in) {
      throw std::invalid_argument("layer " + std::to_string(index) + ": dense expects " +
                                  std::to_string(d->in) + " inputs, got " +
                                  std::to_string(in.size()));
    }
    return {d->out, 1, 1};
  }
  if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
    if (in.ch != c->in_ch) {
      throw std::invalid_argument("layer " + std::to_string(index) + ": conv2d expects " +
                                  std::to_string(c->in_ch) + " channels, got " +
                                  std::to_string(in.ch));
    }
    const int oh = conv_out(in.h, c->kernel, c->stride);
    const int ow = conv_out(in.w, c->kernel, c->stride);
    if (oh < 1 || ow < 1) {
      throw std::invalid_argument("layer " + std::to_string(index) + ": conv2d kernel exceeds input");
    }
    return {c->out_ch, oh, ow};
  }
  if (std::holds_alternative<FlattenSpec>(layer)) return {in.size(), 1, 1};
  return in;  // activation
}

}  // namespace

Network::Network(TensorShape input, std::vector<LayerSpec> layers)
    : input_shape_(input), layers_(std::move(layers)) {
  shapes_.reserve(layers_.size());
  param_offset_.reserve(layers_.size());
  TensorShape cur = input_shape_;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    param_offset_.push_back(offset);
    offset += layer_param_count(layers_[i]);
    cur = layer_output_shape(layers_[i], cur, i);
    shapes_.push_back(cur);
  }
  if (layers_.empty()) shapes_.push_back(cur);
  params_.assign(offset, 0.0f);
}

Network Network::mlp(int in, const std::vector<int>& hidden, int out, Activation act) {
  std::vector<LayerSpec> layers;
  int cur = in;
  for (int h : hidden) {
    layers.push_back(DenseSpec{cur, h});
    layers.push_back(ActSpec{act});
    cur = h;
  }
  layers.push_back(DenseSpec{cur, out});
  return Network({in, 1, 1}, std::move(layers));
}

void Network::init_params(std::uint64_t seed, float scale) {
  Rng rng(derive_seed(seed, 0x11a7));
  TensorShape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    float* p = params_.data() + param_offset_[i];
    if (const auto* d = std::get_if<DenseSpec>(&layers_[i])) {
      const double bound = std::sqrt(3.0 / d->in) * scale;
      const std::size_t n_w = static_cast<std::size_t>(d->out) * d->in;
      for (std::size_t j = 0; j < n_w; ++j) {
        p[j] = static_cast<float>(uniform_real(rng, -bound, bound));
      }
      for (int j = 0; j < d->out; ++j) p[n_w + j] = 0.0f;
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layers_[i])) {
      const double fan_in = static_cast<double>(c->in_ch) * c->kernel * c->kernel;
      const double bound = std::sqrt(3.0 / fan_in) * scale;
      const std::size_t n_w =
          static_cast<std::size_t>(c->out_ch) * c->in_ch * c->kernel * c->kernel;
      for (std::size_t j = 0; j < n_w; ++j) {
        p[j] = static_cast<float>(uniform_real(rng, -bound, bound));
      }
      for (int j = 0; j < c->out_ch; ++j) p[n_w + j] = 0.0f;
    }
    cur = layer_output_shape(layers_[i], cur, i);
  }
}

std::span<float> Network::layer_params(std::size_t layer) {
  const std::size_t count = layer_param_count(layers_[layer]);
  return {params_.data() + param_offset_[layer], count};
}

namespace {

void dense_forward(const DenseSpec& d, const float* p, const float* in, float* out) {
  const float* b = p + static_cast<std::size_t>(d.out) * d.in;
  for (int o = 0; o < d.out; ++o) {
    const float* w = p + static_cast<std::size_t>(o) * d.in;
    double acc = b[o];
    for (int i = 0; i < d.in; ++i) acc += static_cast<double>(w[i]) * in[i];
    out[o] = static_cast<float>(acc);
  }
}

void conv_forward(const Conv2dSpec& c, const TensorShape& in_s, const TensorShape& out_s,
                  const float* p, const float* in, float* out) {
  const int k = c.kernel, st = c.stride;
  const float* bias = p + static_cast<std::size_t>(c.out_ch) * c.in_ch * k * k;
  for (int oc = 0; oc < c.out_ch; ++oc) {
    for (int oy = 0; oy < out_s.h; ++oy) {
      for (int ox = 0; ox < out_s.w; ++ox) {
        double acc = bias[oc];
        for (int ic = 0; ic < c.in_ch; ++ic) {
          const float* w = p + ((static_cast<std::size_t>(oc) * c.in_ch + ic) * k) * k;
          const float* src = in + (static_cast<std::size_t>(ic) * in_s.h + oy * st) * in_s.w +
                             static_cast<std::size_t>(ox) * st;
          for (int ky = 0; ky < k; ++ky) {
            const float* row = src + static_cast<std::size_t>(ky) * in_s.w;
            const float* wrow = w + static_cast<std::size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) {
              acc += static_cast<double>(wrow[kx]) * row[kx];
            }
          }
        }
        out[(static_cast<std::size_t>(oc) * out_s.h + oy) * out_s.w + ox] =
            static_cast<float>(acc);
      }
    }
  }
}

void act_forward(Activation fn, const float* in, float* out, std::size_t n) {
  if (fn == Activation::Tanh) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  }
}

}  // namespace

std::vector<float> Network::forward(std::span<const float> input) const {
  Cache scratch;
  return forward_cached(input, scratch);
}

std::vector<float> Network::forward_cached(std::span<const float> input, Cache& cache) const {
  if (static_cast<int>(input.size()) != input_shape_.size()) {
    throw std::invalid_argument("forward: layer 0 expects " +
                                std::to_string(input_shape_.size()) + " inputs, got " +
                                std::to_string(input.size()));
  }
  cache.acts.assign(layers_.size() + 1, {});
  cache.acts[0].assign(input.begin(), input.end());
  TensorShape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const TensorShape out_s = shapes_[i];
    cache.acts[i + 1].assign(static_cast<std::size_t>(out_s.size()), 0.0f);
    const float* in = cache.acts[i].data();
    float* out = cache.acts[i + 1].data();
    const float* p = params_.data() + param_offset_[i];
    if (const auto* d = std::get_if<DenseSpec>(&layers_[i])) {
      dense_forward(*d, p, in, out);
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layers_[i])) {
      conv_forward(*c, cur, out_s, p, in, out);
    } else if (const auto* a = std::get_if<ActSpec>(&layers_[i])) {
      act_forward(a->fn, in, out, cache.acts[i].size());
    } else {
      cache.acts[i + 1] = cache.acts[i];  // flatten
    }
    cur = out_s;
  }
  return cache.acts.back();
}

void Network::backward(const Cache& cache, std::span<const float> dout,
                       std::span<float> dparams, std::span<float> din) const {
  if (cache.acts.size() != layers_.size() + 1) {
    throw std::invalid_argument("backward: forward cache missing");
  }
  if (dparams.size() != params_.size()) {
    throw std::invalid_argument("backward: dparams size mismatch");
  }
  if (dout.size() != cache.acts.back().size()) {
    throw std::invalid_argument("backward: output gradient size mismatch");
  }
  std::vector<float> grad(dout.begin(), dout.end());
  std::vector<float> grad_prev;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const TensorShape in_s = li == 0 ? input_shape_ : shapes_[li - 1];
    const float* in = cache.acts[li].data();
    const float* p = params_.data() + param_offset_[li];
    float* dp = dparams.data() + param_offset_[li];
    grad_prev.assign(static_cast<std::size_t>(in_s.size()), 0.0f);

    if (const auto* d = std::get_if<DenseSpec>(&layers_[li])) {
      const std::size_t n_w = static_cast<std::size_t>(d->out) * d->in;
      for (int o = 0; o < d->out; ++o) {
        const float g = grad[o];
        if (g == 0.0f) continue;
        const float* w = p + static_cast<std::size_t>(o) * d->in;
        float* dw = dp + static_cast<std::size_t>(o) * d->in;
        for (int i = 0; i < d->in; ++i) {
          dw[i] += g * in[i];
          grad_prev[i] += g * w[i];
        }
        dp[n_w + o] += g;
      }
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layers_[li])) {
      const TensorShape out_s = shapes_[li];
      const int k = c->kernel, st = c->stride;
      const std::size_t n_w =
          static_cast<std::size_t>(c->out_ch) * c->in_ch * k * k;
      for (int oc = 0; oc < c->out_ch; ++oc) {
        for (int oy = 0; oy < out_s.h; ++oy) {
          for (int ox = 0; ox < out_s.w; ++ox) {
            const float g =
                grad[(static_cast<std::size_t>(oc) * out_s.h + oy) * out_s.w + ox];
            if (g == 0.0f) continue;
            dp[n_w + oc] += g;
            for (int ic = 0; ic < c->in_ch; ++ic) {
              const float* w = p + ((static_cast<std::size_t>(oc) * c->in_ch + ic) * k) * k;
              float* dw = dp + ((static_cast<std::size_t>(oc) * c->in_ch + ic) * k) * k;
              const std::size_t base =
                  (static_cast<std::size_t>(ic) * in_s.h + oy * st) * in_s.w +
                  static_cast<std::size_t>(ox) * st;
              for (int ky = 0; ky < k; ++ky) {
                const std::size_t row = base + static_cast<std::size_t>(ky) * in_s.w;
                for (int kx = 0; kx < k; ++kx) {
                  dw[static_cast<std::size_t>(ky) * k + kx] += g * in[row + kx];
                  grad_prev[row + kx] += g * w[static_cast<std::size_t>(ky) * k + kx];
                }
              }
            }
          }
        }
      }
    } else if (const auto* a = std::get_if<ActSpec>(&layers_[li])) {
      const float* out = cache.acts[li + 1].data();
      if (a->fn == Activation::Tanh) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
          grad_prev[i] = grad[i] * (1.0f - out[i] * out[i]);
        }
      } else {
        for (std::size_t i = 0; i < grad.size(); ++i) {
          grad_prev[i] = in[i] > 0.0f ? grad[i] : 0.0f;
        }
      }
    } else {
      grad_prev = grad;  // flatten
    }
    grad.swap(grad_prev);
  }
  if (!din.empty()) {
    if (din.size() != grad.size()) throw std::invalid_argument("backward: din size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i) din[i] = grad[i];
  }
}

std::string Network::spec_text() const {
  std::ostringstream os;
  os << "input " << input_shape_.ch << ' ' << input_shape_.h << ' ' << input_shape_.w << '\n';
  for (const auto& layer : layers_) {
    if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      os << "dense " << d->in << ' ' << d->out << '\n';
    } else if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      os << "conv2d " << c->in_ch << ' ' << c->out_ch << ' ' << c->kernel << ' ' << c->stride
         << '\n';
    } else if (const auto* a = std::get_if<ActSpec>(&layer)) {
      os << "act " << (a->fn == Activation::Tanh ? "tanh" : "relu") << '\n';
    } else {
      os << "flatten\n";
    }
  }
  return os.str();
}

Network Network::from_spec_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  TensorShape input;
  std::vector<LayerSpec> layers;
  bool have_input = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "input") {
      if (!(ls >> input.ch >> input.h >> input.w)) {
        throw std::runtime_error("network spec: bad input line");
      }
      have_input = true;
    } else if (tag == "dense") {
      DenseSpec d;
      if (!(ls >> d.in >> d.out)) throw std::runtime_error("network spec: bad dense line");
      layers.push_back(d);
    } else if (tag == "conv2d") {
      Conv2dSpec c;
      if (!(ls >> c.in_ch >> c.out_ch >> c.kernel >> c.stride)) {
        throw std::runtime_error("network spec: bad conv2d line");
      }
      layers.push_back(c);
    } else if (tag == "act") {
      std::string fn;
      ls >> fn;
      if (fn == "tanh") {
        layers.push_back(ActSpec{Activation::Tanh});
      } else if (fn == "relu") {
        layers.push_back(ActSpec{Activation::Relu});
      } else {
        throw std::runtime_error("network spec: unknown activation '" + fn + "'");
      }
    } else if (tag == "flatten") {
      layers.push_back(FlattenSpec{});
    } else {
      throw std::runtime_error("network spec: unknown layer '" + tag + "'");
    }
  }
  if (!have_input) throw std::runtime_error("network spec: missing input line");
  return Network(input, std::move(layers));
}

AdamState::AdamState(std::size_t n, AdamConfig cfg)
    : config(cfg), m(n, 0.0f), v(n, 0.0f) {}

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  state.step += 1;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.config.lr;
  const double eps = state.config.eps;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] = static_cast<float>(params[i] - lr * m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace paf::nn
