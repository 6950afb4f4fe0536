#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "coid/scene_graph.hpp"
#include "coid/scene_sim.hpp"

namespace coid {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One paired observation with its ground truth.
struct Instance {
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
  WorldScene world;
  SceneGraph view_a;
  SceneGraph view_b;
  std::vector<std::pair<int, int>> gt_pairs;
};

/// World, both rendered views and ground truth for one seed.
Instance make_instance(const SimConfig& cfg, std::uint64_t seed, Split split = Split::kTest);

/// {world, view_a, view_b, gt_pairs}
nlohmann::json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

struct DatasetConfig {
  SimConfig sim;
  int n_train = 2000;
  int n_val = 200;
  int n_test = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

/// Seed of the index-th instance of a split. Independent of the noise
/// settings, so a split regenerated at another noise level shares its scenes.
std::uint64_t instance_seed(std::uint64_t dataset_seed, Split split, int index);

struct Dataset {
  DatasetConfig config;
  std::vector<Instance> train;
  std::vector<Instance> val;
  std::vector<Instance> test;

  std::vector<Instance>& split(Split s);
  const std::vector<Instance>& split(Split s) const;
  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

std::vector<Instance> generate_split(const DatasetConfig& cfg, Split split, int workers = 1);
Dataset generate_dataset(const DatasetConfig& cfg, int workers = 1);

inline constexpr const char* kManifestName = "manifest.json";

/// Writes manifest.json plus one JSON file per instance under instances/.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Throws DataError on a missing or corrupt manifest or instance file.
Dataset load_dataset(const std::filesystem::path& dir, int workers = 1);

}  // namespace coid
