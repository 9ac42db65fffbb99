#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "paf/dataset.hpp"
#include "paf/nn.hpp"

namespace paf {

// Three strided conv layers with shrinking spatial size into a flat
// embedding; the decoder is a three-layer MLP back to pixel space.
nn::Network make_depth_encoder(const CameraIntrinsics& intrinsics, int embedding_dim,
                               std::uint64_t seed);
nn::Network make_depth_decoder(const CameraIntrinsics& intrinsics, int embedding_dim,
                               std::uint64_t seed);

struct AutoencoderConfig {
  int embedding_dim = 64;
  int epochs = 15;
  int minibatch = 64;
  float lr = 2e-3f;
  std::uint64_t seed = 1;
};

struct AutoencoderEpochLog {
  int epoch = 0;  // 0 = before training
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct AutoencoderResult {
  nn::Network encoder;
  nn::Network decoder;
  std::vector<AutoencoderEpochLog> log;
  double initial_val_mse = 0.0;
  double final_val_mse = 0.0;
};

// Mean per-pixel squared reconstruction error over the given frames.
double autoencoder_mse(const nn::Network& encoder, const nn::Network& decoder,
                       const DepthDataset& dataset, std::span<const std::uint32_t> indices,
                       int workers = 1);

// Minibatch Adam on the L2 reconstruction loss over normalized images.
AutoencoderResult train_autoencoder(const DepthDataset& dataset, const AutoencoderConfig& config,
                                    int workers = 1, std::ostream* progress = nullptr);

void write_ae_log_csv(const std::vector<AutoencoderEpochLog>& log, std::ostream& os);

}  // namespace paf
