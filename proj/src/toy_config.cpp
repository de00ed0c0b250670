#include "asr/toy_config.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace asr {

namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error("toy config: missing key '" + where + key + "'");
  }
  return obj.at(key);
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& where) {
  const json& v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error("toy config: key '" + where + key + "' has the wrong type");
  }
}

}  // namespace

ToyRunConfig parse_toy_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("toy config: ") + e.what());
  }
  ToyRunConfig cfg;
  std::filesystem::path net = get<std::string>(root, "network", "");
  if (net.is_relative()) net = std::filesystem::path(base_dir) / net;
  cfg.network = NetworkSpec::load(net.string());

  const json& d = require(root, "data", "");
  cfg.data.num_samples = get<int>(d, "num_samples", "data.");
  cfg.data.min_letters = get<int>(d, "min_letters", "data.");
  cfg.data.max_letters = get<int>(d, "max_letters", "data.");
  cfg.data.min_letter_frames = get<int>(d, "min_letter_frames", "data.");
  cfg.data.max_letter_frames = get<int>(d, "max_letter_frames", "data.");
  cfg.data.noise = get<double>(d, "noise", "data.");
  cfg.data.seed = get<uint64_t>(d, "seed", "data.");

  const json& t = require(root, "train", "");
  cfg.train.epochs = get<int>(t, "epochs", "train.");
  cfg.train.holdout = get<int>(t, "holdout", "train.");
  cfg.train.learning_rate = get<double>(t, "learning_rate", "train.");
  cfg.train.clip_norm = get<double>(t, "clip_norm", "train.");
  cfg.train.seed = get<uint64_t>(t, "seed", "train.");
  return cfg;
}

ToyRunConfig load_toy_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open toy config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toy_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string ler_curve_csv(std::span<const EpochStats> curve) {
  std::string out = "epoch,ler\n";
  char buf[64];
  for (const auto& e : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f\n", e.epoch, e.heldout_ler);
    out += buf;
  }
  return out;
}

}  // namespace asr
