#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "paf/nn.hpp"

namespace paf::nn {

// A .ckpt file holds named networks (layer spec text + parameter blob) and
// named raw f32 arrays under a versioned magic header. Entries are stored
// sorted by name, so save -> load -> save is byte-identical.
struct CheckpointBundle {
  std::map<std::string, Network> nets;
  std::map<std::string, std::vector<float>> arrays;
};

void save_checkpoint(const CheckpointBundle& bundle, std::ostream& os);
void save_checkpoint(const CheckpointBundle& bundle, const std::filesystem::path& file);
CheckpointBundle load_checkpoint(std::istream& is);
CheckpointBundle load_checkpoint(const std::filesystem::path& file);

// Single-network convenience wrappers (entry name "net").
void save_network(const Network& net, const std::filesystem::path& file);
Network load_network(const std::filesystem::path& file);

}  // namespace paf::nn
