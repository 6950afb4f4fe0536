#include "coid/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "coid/error.hpp"
#include "coid/parallel.hpp"
#include "coid/rng.hpp"

namespace coid {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + name + "'");
}

Instance make_instance(const SimConfig& cfg, std::uint64_t seed, Split split) {
  Instance inst;
  inst.seed = seed;
  inst.split = split;
  inst.world = generate_scene(cfg, seed);
  inst.view_a = render_view(inst.world, 0, cfg);
  inst.view_b = render_view(inst.world, 1, cfg);
  inst.gt_pairs = inst.world.gt_correspondence;
  return inst;
}

nlohmann::json to_json(const Instance& inst) {
  nlohmann::json gt = nlohmann::json::array();
  for (const auto& [a, b] : inst.gt_pairs) gt.push_back({a, b});
  return {{"seed", inst.seed},
          {"split", split_name(inst.split)},
          {"world", to_json(inst.world)},
          {"view_a", to_json(inst.view_a)},
          {"view_b", to_json(inst.view_b)},
          {"gt_pairs", gt}};
}

Instance instance_from_json(const nlohmann::json& j) {
  Instance inst;
  try {
    inst.seed = j.value("seed", std::uint64_t{0});
    inst.split = split_from_name(j.value("split", std::string("test")));
    if (j.contains("world")) inst.world = world_scene_from_json(j.at("world"));
    inst.view_a = scene_graph_from_json(j.at("view_a"));
    inst.view_b = scene_graph_from_json(j.at("view_b"));
    for (const auto& p : j.at("gt_pairs")) {
      const int a = p.at(0).get<int>(), b = p.at(1).get<int>();
      if (a < 0 || b < 0 || a >= inst.view_a.size() || b >= inst.view_b.size())
        throw DataError("instance: gt pair (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") refers to a missing node");
      inst.gt_pairs.emplace_back(a, b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("instance: ") + e.what());
  }
  return inst;
}

void DatasetConfig::validate() const {
  sim.validate();
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("dataset: negative split size");
  if (n_train + n_val + n_test == 0) throw ConfigError("dataset: n_instances must be > 0");
}

nlohmann::json to_json(const DatasetConfig& cfg) {
  return {{"sim", to_json(cfg.sim)},
          {"n_train", cfg.n_train},
          {"n_val", cfg.n_val},
          {"n_test", cfg.n_test},
          {"seed", cfg.seed}};
}

DatasetConfig dataset_config_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "sim")
        cfg.sim = sim_config_from_json(value);
      else if (key == "n_train")
        cfg.n_train = value.get<int>();
      else if (key == "n_val")
        cfg.n_val = value.get<int>();
      else if (key == "n_test")
        cfg.n_test = value.get<int>();
      else if (key == "seed")
        cfg.seed = value.get<std::uint64_t>();
      else
        throw ConfigError("dataset config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::uint64_t instance_seed(std::uint64_t dataset_seed, Split split, int index) {
  return RngStream::derive(dataset_seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index)});
}

std::vector<Instance>& Dataset::split(Split s) {
  return s == Split::kTrain ? train : s == Split::kVal ? val : test;
}

const std::vector<Instance>& Dataset::split(Split s) const {
  return s == Split::kTrain ? train : s == Split::kVal ? val : test;
}

std::vector<Instance> generate_split(const DatasetConfig& cfg, Split split, int workers) {
  const int count = split == Split::kTrain ? cfg.n_train : split == Split::kVal ? cfg.n_val : cfg.n_test;
  std::vector<Instance> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i] = make_instance(cfg.sim, instance_seed(cfg.seed, split, static_cast<int>(i)), split);
  });
  return out;
}

Dataset generate_dataset(const DatasetConfig& cfg, int workers) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) ds.split(s) = generate_split(cfg, s, workers);
  return ds;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string instance_file(Split s, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "instances/%s_%05zu.json", split_name(s).c_str(), index);
  return buf;
}

}  // namespace

void write_dataset(const Dataset& ds, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "instances", ec);
  if (ec) throw DataError("cannot create " + (dir / "instances").string() + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto& items = ds.split(s);
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string file = instance_file(s, i);
      write_text(dir / file, to_json(items[i]).dump() + "\n");
      entries.push_back({{"file", file}, {"split", split_name(s)}, {"seed", items[i].seed}});
    }
  }
  nlohmann::json manifest{{"format", "coid-dataset"},
                          {"version", 1},
                          {"config", to_json(ds.config)},
                          {"counts",
                           {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}},
                          {"instances", entries}};
  write_text(dir / kManifestName, manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir, int workers) {
  const nlohmann::json manifest = read_json(dir / kManifestName);
  if (manifest.value("format", "") != "coid-dataset" || manifest.value("version", 0) != 1)
    throw DataError("corrupt manifest " + (dir / kManifestName).string() + ": bad format header");
  Dataset ds;
  struct Entry {
    std::string file;
    Split split;
  };
  std::vector<Entry> entries;
  try {
    ds.config = dataset_config_from_json(manifest.at("config"));
    for (const auto& e : manifest.at("instances"))
      entries.push_back({e.at("file").get<std::string>(), split_from_name(e.at("split").get<std::string>())});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt manifest " + (dir / kManifestName).string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("corrupt manifest " + (dir / kManifestName).string() + ": " + e.what());
  }
  std::vector<Instance> loaded(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    loaded[i] = instance_from_json(read_json(dir / entries[i].file));
    loaded[i].split = entries[i].split;
  });
  for (std::size_t i = 0; i < entries.size(); ++i) ds.split(entries[i].split).push_back(std::move(loaded[i]));
  return ds;
}

}  // namespace coid
