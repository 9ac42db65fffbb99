#include "paf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace paf::nn {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'F', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindNetwork = 0;
constexpr std::uint32_t kKindArray = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return v;
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return v;
}
void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1u << 24)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated");
  return s;
}
void write_floats(std::ostream& os, std::span<const float> v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}
std::vector<float> read_floats(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible blob length");
  std::vector<float> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw std::runtime_error("checkpoint: truncated parameter blob");
  return v;
}

}  // namespace

void save_checkpoint(const CheckpointBundle& bundle, std::ostream& os) {
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(bundle.nets.size() + bundle.arrays.size()));
  for (const auto& [name, net] : bundle.nets) {
    write_string(os, name);
    write_u32(os, kKindNetwork);
    write_string(os, net.spec_text());
    write_floats(os, net.params());
  }
  for (const auto& [name, arr] : bundle.arrays) {
    write_string(os, name);
    write_u32(os, kKindArray);
    write_floats(os, arr);
  }
}

void save_checkpoint(const CheckpointBundle& bundle, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + file.string());
  save_checkpoint(bundle, os);
  if (!os) throw std::runtime_error("checkpoint write failed: " + file.string());
}

CheckpointBundle load_checkpoint(std::istream& is) {
  char magic[8] = {};
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(is);
  CheckpointBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(is);
    const std::uint32_t kind = read_u32(is);
    if (kind == kKindNetwork) {
      const std::string spec = read_string(is);
      Network net = Network::from_spec_text(spec);
      std::vector<float> params = read_floats(is);
      if (params.size() != net.param_count()) {
        throw std::runtime_error("checkpoint: parameter blob size mismatch for '" + name + "'");
      }
      std::copy(params.begin(), params.end(), net.params().begin());
      bundle.nets.emplace(name, std::move(net));
    } else if (kind == kKindArray) {
      bundle.arrays.emplace(name, read_floats(is));
    } else {
      throw std::runtime_error("checkpoint: unknown entry kind");
    }
  }
  return bundle;
}

CheckpointBundle load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + file.string());
  return load_checkpoint(is);
}

void save_network(const Network& net, const std::filesystem::path& file) {
  CheckpointBundle bundle;
  bundle.nets.emplace("net", net);
  save_checkpoint(bundle, file);
}

Network load_network(const std::filesystem::path& file) {
  CheckpointBundle bundle = load_checkpoint(file);
  auto it = bundle.nets.find("net");
  if (it == bundle.nets.end()) throw std::runtime_error("checkpoint has no 'net' entry");
  return std::move(it->second);
}

}  // namespace paf::nn
