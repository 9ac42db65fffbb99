#include "paf/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

nn::Network make_depth_encoder(const CameraIntrinsics& intr, int embedding_dim,
                               std::uint64_t seed) {
  const auto conv_out = [](int in) { return (in - 4) / 2 + 1; };
  const int h3 = conv_out(conv_out(conv_out(intr.height)));
  const int w3 = conv_out(conv_out(conv_out(intr.width)));
  std::vector<nn::LayerSpec> layers{
      nn::Conv2dSpec{1, 8, 4, 2},   nn::ActSpec{nn::Activation::Relu},
      nn::Conv2dSpec{8, 16, 4, 2},  nn::ActSpec{nn::Activation::Relu},
      nn::Conv2dSpec{16, 32, 4, 2}, nn::ActSpec{nn::Activation::Relu},
      nn::FlattenSpec{},            nn::DenseSpec{32 * h3 * w3, embedding_dim}};
  nn::Network net({1, intr.height, intr.width}, std::move(layers));
  net.init_params(derive_seed(seed, 0xE4C), 1.0f);
  return net;
}

nn::Network make_depth_decoder(const CameraIntrinsics& intr, int embedding_dim,
                               std::uint64_t seed) {
  const int pixels = intr.width * intr.height;
  std::vector<nn::LayerSpec> layers{
      nn::DenseSpec{embedding_dim, 256}, nn::ActSpec{nn::Activation::Relu},
      nn::DenseSpec{256, 1024},          nn::ActSpec{nn::Activation::Relu},
      nn::DenseSpec{1024, pixels}};
  nn::Network net({embedding_dim, 1, 1}, std::move(layers));
  net.init_params(derive_seed(seed, 0xDEC), 1.0f);
  return net;
}

double autoencoder_mse(const nn::Network& encoder, const nn::Network& decoder,
                       const DepthDataset& dataset, std::span<const std::uint32_t> indices,
                       int workers) {
  if (indices.empty()) return 0.0;
  const std::size_t w_count =
      std::max<std::size_t>(1, std::min<std::size_t>(workers, indices.size()));
  std::vector<double> partial(w_count, 0.0);
  parallel_for(indices.size(), static_cast<int>(w_count),
               [&](std::size_t begin, std::size_t end, int w) {
                 for (std::size_t k = begin; k < end; ++k) {
                   const auto& img = dataset.images[indices[k]];
                   const std::vector<float> rec = decoder.forward(encoder.forward(img));
                   double se = 0.0;
                   for (std::size_t i = 0; i < img.size(); ++i) {
                     const double d = static_cast<double>(rec[i]) - img[i];
                     se += d * d;
                   }
                   partial[w] += se / static_cast<double>(img.size());
                 }
               });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / static_cast<double>(indices.size());
}

AutoencoderResult train_autoencoder(const DepthDataset& dataset, const AutoencoderConfig& config,
                                    int workers, std::ostream* progress) {
  if (dataset.size() == 0) throw std::invalid_argument("train_autoencoder: empty dataset");
  AutoencoderResult result{
      make_depth_encoder(dataset.intrinsics, config.embedding_dim, config.seed),
      make_depth_decoder(dataset.intrinsics, config.embedding_dim, config.seed),
      {},
      0.0,
      0.0};
  nn::Network& enc = result.encoder;
  nn::Network& dec = result.decoder;

  const std::vector<std::uint32_t>& train = dataset.train_indices;
  const std::vector<std::uint32_t>& val =
      dataset.val_indices.empty() ? dataset.train_indices : dataset.val_indices;
  if (train.empty()) throw std::invalid_argument("train_autoencoder: empty training split");

  result.initial_val_mse = autoencoder_mse(enc, dec, dataset, val, workers);
  result.log.push_back({0, 0.0, result.initial_val_mse});

  nn::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  nn::AdamState adam_enc(enc.param_count(), adam_cfg);
  nn::AdamState adam_dec(dec.param_count(), adam_cfg);

  const int embedding_dim = enc.output_shape().size();
  std::vector<std::uint32_t> order(train.begin(), train.end());
  std::vector<float> grad_enc(enc.param_count()), grad_dec(dec.param_count());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, 0xAE00 + epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double train_se_sum = 0.0;
    std::size_t train_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.minibatch)) {
      const std::size_t mb_n =
          std::min<std::size_t>(config.minibatch, order.size() - start);
      std::fill(grad_enc.begin(), grad_enc.end(), 0.0f);
      std::fill(grad_dec.begin(), grad_dec.end(), 0.0f);
      const std::size_t w_count = std::max<std::size_t>(1, std::min<std::size_t>(workers, mb_n));
      std::vector<std::vector<float>> ge(w_count), gd(w_count);
      std::vector<double> se(w_count, 0.0);
      for (std::size_t w = 0; w < w_count; ++w) {
        ge[w].assign(enc.param_count(), 0.0f);
        gd[w].assign(dec.param_count(), 0.0f);
      }
      parallel_for(mb_n, static_cast<int>(w_count), [&](std::size_t b, std::size_t e, int w) {
        nn::Network::Cache cache_e, cache_d;
        std::vector<float> d_out;
        std::vector<float> d_embed(static_cast<std::size_t>(embedding_dim));
        for (std::size_t k = b; k < e; ++k) {
          const auto& img = dataset.images[order[start + k]];
          const std::vector<float> z = enc.forward_cached(img, cache_e);
          const std::vector<float> rec = dec.forward_cached(z, cache_d);
          d_out.assign(img.size(), 0.0f);
          // Per-pixel mean squared error over the minibatch.
          const double scale = 2.0 / (static_cast<double>(mb_n) * img.size());
          double sample_se = 0.0;
          for (std::size_t i = 0; i < img.size(); ++i) {
            const double diff = static_cast<double>(rec[i]) - img[i];
            sample_se += diff * diff;
            d_out[i] = static_cast<float>(diff * scale);
          }
          se[w] += sample_se / static_cast<double>(img.size());
          dec.backward(cache_d, d_out, gd[w], d_embed);
          enc.backward(cache_e, d_embed, ge[w]);
        }
      });
      for (std::size_t w = 0; w < w_count; ++w) {
        for (std::size_t i = 0; i < grad_enc.size(); ++i) grad_enc[i] += ge[w][i];
        for (std::size_t i = 0; i < grad_dec.size(); ++i) grad_dec[i] += gd[w][i];
        train_se_sum += se[w];
      }
      train_count += mb_n;
      nn::adam_step(enc.params(), grad_enc, adam_enc);
      nn::adam_step(dec.params(), grad_dec, adam_dec);
    }
    const double train_mse = train_se_sum / static_cast<double>(train_count);
    const double val_mse = autoencoder_mse(enc, dec, dataset, val, workers);
    result.log.push_back({epoch, train_mse, val_mse});
    if (progress) {
      *progress << "epoch " << epoch << " train_mse " << fmt_f32(static_cast<float>(train_mse))
                << " val_mse " << fmt_f32(static_cast<float>(val_mse)) << '\n';
      progress->flush();
    }
  }
  result.final_val_mse = result.log.back().val_mse;
  return result;
}

void write_ae_log_csv(const std::vector<AutoencoderEpochLog>& log, std::ostream& os) {
  os << "epoch,train_mse,val_mse\n";
  for (const auto& row : log) {
    os << row.epoch << ',' << fmt_f32(static_cast<float>(row.train_mse)) << ','
       << fmt_f32(static_cast<float>(row.val_mse)) << '\n';
  }
}

}  // namespace paf
