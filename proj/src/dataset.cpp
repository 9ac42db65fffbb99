#include "paf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "paf/common.hpp"

namespace paf {

namespace {

struct EpisodeRecord {
  std::vector<std::vector<float>> images;
  std::vector<std::vector<float>> obs;
  std::vector<std::array<float, 4>> actions;
  bool reached_goal = false;
};

}  // namespace

DepthDataset collect_depth_dataset(const PolicyHead& teacher, const World& world,
                                   const GuidingPath& path, const EnvConfig& config,
                                   const CameraIntrinsics& intrinsics, int n_episodes,
                                   std::uint64_t seed, int workers, double val_fraction) {
  if (n_episodes < 1) throw std::invalid_argument("collect_depth_dataset: n_episodes < 1");
  std::vector<EpisodeRecord> records(n_episodes);
  parallel_for(static_cast<std::size_t>(n_episodes), workers,
               [&](std::size_t begin, std::size_t end, int) {
                 for (std::size_t ep = begin; ep < end; ++ep) {
                   EpisodeRecord& rec = records[ep];
                   Env env(world, path, config);
                   env.reset(derive_seed(seed, 0xDA7A + ep));
                   while (!env.episode().done()) {
                     const DepthImage img =
                         render_depth(world, env.state().p, env.state().q, intrinsics);
                     std::vector<float> obs = env.observe_teacher();
                     const Eigen::Vector4d a = teacher.act_mean(obs);
                     rec.images.push_back(normalize_depth(img));
                     rec.obs.push_back(std::move(obs));
                     rec.actions.push_back({static_cast<float>(a[0]), static_cast<float>(a[1]),
                                            static_cast<float>(a[2]), static_cast<float>(a[3])});
                     env.step(a);
                   }
                   rec.reached_goal = env.episode().reason == DoneReason::Goal;
                 }
               });

  DepthDataset ds;
  ds.intrinsics = intrinsics;
  int goals = 0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    EpisodeRecord& rec = records[ep];
    goals += rec.reached_goal ? 1 : 0;
    for (std::size_t t = 0; t < rec.images.size(); ++t) {
      ds.images.push_back(std::move(rec.images[t]));
      ds.teacher_obs.push_back(std::move(rec.obs[t]));
      ds.teacher_actions.push_back(rec.actions[t]);
      ds.episode.push_back(ep);
      ds.step.push_back(static_cast<std::int32_t>(t));
    }
  }
  if (goals == 0) {
    throw std::runtime_error("collect_depth_dataset: teacher never reached the goal in " +
                             std::to_string(n_episodes) + " episodes");
  }

  std::vector<std::uint32_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(derive_seed(seed, 0x5917));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * ds.size()));
  ds.val_indices.assign(order.begin(), order.begin() + n_val);
  ds.train_indices.assign(order.begin() + n_val, order.end());
  std::sort(ds.val_indices.begin(), ds.val_indices.end());
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  return ds;
}

void save_dataset(const DepthDataset& ds, const std::filesystem::path& prefix) {
  std::filesystem::path blob_path = prefix;
  blob_path += ".depth";
  std::filesystem::path csv_path = prefix;
  csv_path += ".csv";

  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path.string());
  for (const auto& img_norm : ds.images) {
    DepthImage img = denormalize_depth(img_norm, ds.intrinsics);
    write_depth_blob(img, blob);
  }

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  csv << "# paf depth dataset width=" << ds.intrinsics.width
      << " height=" << ds.intrinsics.height << " hfov=" << fmt_f64(ds.intrinsics.hfov)
      << " max_range=" << fmt_f64(ds.intrinsics.max_range) << " frames=" << ds.size() << '\n';
  csv << "frame,episode,step,split";
  const std::size_t obs_dim = ds.teacher_obs.empty() ? 0 : ds.teacher_obs.front().size();
  for (std::size_t i = 0; i < obs_dim; ++i) csv << ",obs" << i;
  for (int i = 0; i < 4; ++i) csv << ",act" << i;
  csv << '\n';
  std::vector<char> split(ds.size(), 't');
  for (std::uint32_t i : ds.val_indices) split[i] = 'v';
  for (std::size_t f = 0; f < ds.size(); ++f) {
    csv << f << ',' << ds.episode[f] << ',' << ds.step[f] << ','
        << (split[f] == 'v' ? "val" : "train");
    for (float v : ds.teacher_obs[f]) csv << ',' << fmt_f32(v);
    for (float v : ds.teacher_actions[f]) csv << ',' << fmt_f32(v);
    csv << '\n';
  }
}

DepthDataset load_dataset(const std::filesystem::path& prefix) {
  std::filesystem::path blob_path = prefix;
  blob_path += ".depth";
  std::filesystem::path csv_path = prefix;
  csv_path += ".csv";

  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(csv, line) || line.rfind("# paf depth dataset", 0) != 0) {
    throw std::runtime_error("dataset csv: bad meta line");
  }
  DepthDataset ds;
  {
    std::istringstream meta(line);
    std::string tok;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "width") ds.intrinsics.width = std::stoi(val);
      else if (key == "height") ds.intrinsics.height = std::stoi(val);
      else if (key == "hfov") ds.intrinsics.hfov = std::stod(val);
      else if (key == "max_range") ds.intrinsics.max_range = std::stod(val);
    }
  }
  if (!std::getline(csv, line)) throw std::runtime_error("dataset csv: missing header");

  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + blob_path.string());

  std::uint32_t frame = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < 8) throw std::runtime_error("dataset csv: short row");
    ds.episode.push_back(std::stoi(fields[1]));
    ds.step.push_back(std::stoi(fields[2]));
    if (fields[3] == "val") {
      ds.val_indices.push_back(frame);
    } else {
      ds.train_indices.push_back(frame);
    }
    const std::size_t obs_dim = fields.size() - 8;
    std::vector<float> obs(obs_dim);
    for (std::size_t i = 0; i < obs_dim; ++i) obs[i] = std::stof(fields[4 + i]);
    ds.teacher_obs.push_back(std::move(obs));
    std::array<float, 4> act{};
    for (int i = 0; i < 4; ++i) act[i] = std::stof(fields[4 + obs_dim + i]);
    ds.teacher_actions.push_back(act);

    const DepthImage img = read_depth_blob(blob, ds.intrinsics.max_range);
    ds.images.push_back(normalize_depth(img));
    ++frame;
  }
  return ds;
}

}  // namespace paf
