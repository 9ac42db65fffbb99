#include "paf/gae.hpp"

#include <stdexcept>

namespace paf {

void compute_gae(std::span<const float> rewards, std::span<const float> values,
                 std::span<const std::uint8_t> dones, double discount, double lambda,
                 std::span<float> advantages_out, std::span<float> returns_out) {
  const std::size_t T = rewards.size();
  if (dones.size() != T || advantages_out.size() != T || returns_out.size() != T ||
      values.size() != T + 1) {
    throw std::invalid_argument("compute_gae: array lengths are inconsistent");
  }
  double gae = 0.0;
  for (std::size_t i = T; i-- > 0;) {
    const double nonterminal = dones[i] ? 0.0 : 1.0;
    const double delta =
        rewards[i] + discount * values[i + 1] * nonterminal - values[i];
    gae = delta + discount * lambda * nonterminal * gae;
    advantages_out[i] = static_cast<float>(gae);
    returns_out[i] = static_cast<float>(gae + values[i]);
  }
}

}  // namespace paf
