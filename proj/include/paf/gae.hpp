#pragma once

#include <cstdint>
#include <span>

namespace paf {

// Generalized advantage estimation over one rollout segment.
// values holds T+1 entries (the last is the bootstrap value of the state
// after the final step); rewards and dones hold T. done_t marks that the
// episode terminated at step t, which resets the recursion and drops the
// bootstrap across the boundary. returns_out = advantages + values[0..T).
void compute_gae(std::span<const float> rewards, std::span<const float> values,
                 std::span<const std::uint8_t> dones, double discount, double lambda,
                 std::span<float> advantages_out, std::span<float> returns_out);

}  // namespace paf
