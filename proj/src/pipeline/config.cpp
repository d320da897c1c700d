#include <charconv>
#include <fstream>
#include <sstream>

#include "subdivnet/error.h"
#include "subdivnet/pipeline.h"

namespace subdivnet::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto lo = s.find_first_not_of(" \t\r");
  if (lo == std::string::npos) return {};
  const auto hi = s.find_last_not_of(" \t\r");
  return s.substr(lo, hi - lo + 1);
}

template <typename T>
T number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("config: bad value for " + key + ": '" + text + "'");
  return v;
}

}  // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", number);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", number);
    if (out.count(key)) throw ParseError("config: duplicate key " + key, number);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

TrainConfig train_config(const std::map<std::string, std::string>& values, TrainConfig c) {
  for (const auto& [key, value] : values) {
    if (key == "epochs") {
      c.options.epochs = number<int>(key, value);
    } else if (key == "batch_size") {
      c.options.batch_size = number<int>(key, value);
    } else if (key == "optimizer") {
      if (value != "adam" && value != "sgd") throw ParseError("config: optimizer must be adam or sgd");
      c.options.optimizer = value == "adam" ? nn::OptimizerKind::Adam : nn::OptimizerKind::Sgd;
    } else if (key == "learning_rate") {
      c.options.learning_rate = number<double>(key, value);
    } else if (key == "momentum") {
      c.options.momentum = number<double>(key, value);
    } else if (key == "weight_decay") {
      c.options.weight_decay = number<double>(key, value);
    } else if (key == "seed") {
      c.options.seed = number<std::uint64_t>(key, value);
    } else if (key == "width") {
      c.width = number<int>(key, value);
    } else if (key == "channels") {
      c.channels.clear();
      std::istringstream in(value);
      std::string item;
      while (std::getline(in, item, ',')) c.channels.push_back(number<int>(key, trim(item)));
    } else {
      throw ParseError("config: unknown key " + key);
    }
  }
  if (c.options.epochs < 0 || c.options.batch_size < 1 || c.width < 1) throw ParseError("config: values out of range");
  return c;
}

nn::Model build_model(const DatasetManifest& manifest, int depth, const TrainConfig& config) {
  const int in = nn::ModelConfig::kInputChannels;
  const std::uint64_t seed = config.options.seed;
  if (manifest.task == nn::Task::Segment) return nn::build_segmenter(depth, in, config.width, manifest.classes, seed);
  std::vector<int> channels = config.channels;
  if (channels.empty()) {
    channels.push_back(in);
    for (int l = 1; l <= depth; ++l) channels.push_back(16 << l);
  }
  return nn::build_classifier(depth, channels, manifest.classes, seed);
}

}  // namespace subdivnet::pipeline
