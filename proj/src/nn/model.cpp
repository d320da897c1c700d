#include "subdivnet/nn/model.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "subdivnet/error.h"

namespace subdivnet::nn {

namespace {

Matrix uniform(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

const char* kind_name(ModelKind k) { return k == ModelKind::Classifier ? "classifier" : "segmenter"; }

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), bytes);
  if (!in) throw ParseError("truncated checkpoint", 0);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_blob(std::ostream& out, const std::string& name, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  const int depth = config_.depth;
  const auto& ch = config_.channels;
  if (depth < 2) throw Error("the reference networks need a pyramid of depth >= 2");
  if (config_.classes < 1) throw Error("at least one class is required");
  for (int c : ch) {
    if (c < 1) throw Error("channel counts must be positive");
  }
  std::mt19937_64 rng(seed);
  if (config_.kind == ModelKind::Classifier) {
    if (static_cast<int>(ch.size()) != depth + 1) {
      throw Error("classifier channel schedule needs depth + 1 = " + std::to_string(depth + 1) + " entries, got " +
                  std::to_string(ch.size()));
    }
    for (int i = 1; i <= depth; ++i) {
      const int level = depth - i + 1;
      add_conv({level, 3, 1, 1}, ch[i - 1], ch[i], rng);
      add_bn(ch[i]);
      add_conv({level, 3, 1, 1}, ch[i], ch[i], rng);
      add_bn(ch[i]);
    }
    add_linear(ch[depth], config_.classes, rng);
  } else {
    if (ch.size() != 2) throw Error("segmenter channel schedule is (input channels, width)");
    const int in = ch[0], w = ch[1], l = depth;
    auto block = [&](ConvSpec spec, int cin, int cout) {
      add_conv(spec, cin, cout, rng);
      add_bn(cout);
    };
    block({l, 3, 1, 1}, in, w);
    block({l, 3, 1, 2}, w, 2 * w);
    block({l - 1, 3, 1, 2}, 2 * w, 4 * w);
    for (int d : {1, 2, 4}) block({l - 2, 3, d, 1}, 4 * w, 4 * w);
    block({l - 1, 3, 1, 1}, 6 * w, 2 * w);
    block({l, 3, 1, 1}, 3 * w, w);
    add_linear(w, config_.classes, rng);
  }
  input_mean = Matrix::Zero(1, ch[0]);
  input_inv_std = Matrix::Ones(1, ch[0]);
}

int Model::add_parameter(const std::string& name, Matrix value) {
  params_.emplace_back(name, std::move(value));
  return static_cast<int>(params_.size()) - 1;
}

int Model::add_conv(ConvSpec spec, int in, int out, std::mt19937_64& rng) {
  const int id = static_cast<int>(convs_.size());
  const std::string prefix = "conv" + std::to_string(id);
  ConvLayer layer{spec, in, out, {}, -1};
  // Each of the four terms sums up to three neighbor values.
  const double bound = std::sqrt(6.0 / (4.0 * 3.0 * in));
  for (int k = 0; k < 4; ++k) layer.weights[k] = add_parameter(prefix + ".w" + std::to_string(k), uniform(in, out, bound, rng));
  if (config_.conv_bias) layer.bias = add_parameter(prefix + ".bias", Matrix::Zero(1, out));
  convs_.push_back(layer);
  return id;
}

int Model::add_bn(int channels) {
  const int id = static_cast<int>(bns_.size());
  const std::string prefix = "bn" + std::to_string(id);
  BatchNormLayer layer;
  layer.gamma = add_parameter(prefix + ".gamma", Matrix::Ones(1, channels));
  layer.beta = add_parameter(prefix + ".beta", Matrix::Zero(1, channels));
  layer.stats.mean = Matrix::Zero(1, channels);
  layer.stats.var = Matrix::Ones(1, channels);
  bns_.push_back(std::move(layer));
  return id;
}

int Model::add_linear(int in, int out, std::mt19937_64& rng) {
  const int id = static_cast<int>(linears_.size());
  const std::string prefix = "linear" + std::to_string(id);
  LinearLayer layer;
  layer.weight = add_parameter(prefix + ".weight", uniform(in, out, 1.0 / std::sqrt(in), rng));
  layer.bias = add_parameter(prefix + ".bias", Matrix::Zero(1, out));
  linears_.push_back(layer);
  return id;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.size();
  return n;
}

std::vector<ConvSpec> Model::conv_specs() const {
  std::set<ConvSpec> specs;
  for (const ConvLayer& c : convs_) specs.insert(c.spec);
  return {specs.begin(), specs.end()};
}

void Model::fit_input_normalization(std::span<const Sample> samples) {
  const int c = config_.channels[0];
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  double count = 0;
  for (const Sample& s : samples) {
    if (s.features.cols() != c) throw ShapeError("sample " + s.shape_id + " has the wrong channel count");
    for (int r = 0; r < s.features.rows(); ++r) {
      for (int k = 0; k < c; ++k) sum[k] += s.features(r, k);
    }
    count += s.features.rows();
  }
  if (count == 0) throw Error("cannot fit input statistics on an empty dataset");
  for (int k = 0; k < c; ++k) sum[k] /= count;
  for (const Sample& s : samples) {
    for (int r = 0; r < s.features.rows(); ++r) {
      for (int k = 0; k < c; ++k) sq[k] += (s.features(r, k) - sum[k]) * (s.features(r, k) - sum[k]);
    }
  }
  for (int k = 0; k < c; ++k) {
    const double sd = std::sqrt(sq[k] / count);
    input_mean(0, k) = sum[k];
    input_inv_std(0, k) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

Var Model::conv(Tape& tape, Var x, const Batch& batch, int index) {
  const ConvLayer& c = convs_[index];
  if (x.cols() != c.in) throw ShapeError("conv" + std::to_string(index) + " expects " + std::to_string(c.in) + " channels");
  std::array<Var, 4> w;
  for (int k = 0; k < 4; ++k) w[k] = tape.parameter(params_[c.weights[k]]);
  Var b = c.bias >= 0 ? tape.parameter(params_[c.bias]) : Var{};
  return mesh_conv(x, batch.neighborhood(c.spec), w, b);
}

Var Model::bn(Tape& tape, Var x, int index, bool training) {
  BatchNormLayer& l = bns_[index];
  return batch_norm(x, tape.parameter(params_[l.gamma]), tape.parameter(params_[l.beta]), l.stats, training);
}

Var Model::conv_bn_relu(Tape& tape, Var x, const Batch& batch, int index, bool training) {
  return relu(bn(tape, conv(tape, x, batch, index), index, training));
}

Var Model::linear(Tape& tape, Var x, int index) {
  const LinearLayer& l = linears_[index];
  return add_row(matmul(x, tape.parameter(params_[l.weight])), tape.parameter(params_[l.bias]));
}

Var Model::forward(Tape& tape, const Batch& batch, bool training) {
  if (batch.depth != config_.depth) {
    throw ShapeError("model expects pyramids of depth " + std::to_string(config_.depth) + ", batch has " +
                     std::to_string(batch.depth));
  }
  if (batch.input.cols() != config_.channels[0]) throw ShapeError("input channel count does not match the model");
  Var x = standardize(tape.constant(batch.input), input_mean, input_inv_std);
  return config_.kind == ModelKind::Classifier ? forward_classifier(tape, x, batch, training)
                                               : forward_segmenter(tape, x, batch, training);
}

Var Model::forward_classifier(Tape& tape, Var x, const Batch& batch, bool training) {
  int layer = 0;
  for (int level = config_.depth; level >= 1; --level) {
    x = conv_bn_relu(tape, x, batch, layer++, training);
    x = conv_bn_relu(tape, x, batch, layer++, training);
    x = max_pool(x, batch.children[level]);
  }
  x = segment_mean(x, batch.offsets[0]);
  return linear(tape, x, 0);
}

Var Model::forward_segmenter(Tape& tape, Var x, const Batch& batch, bool training) {
  const int l = config_.depth;
  const Var stem = conv_bn_relu(tape, x, batch, 0, training);
  const Var down1 = conv_bn_relu(tape, stem, batch, 1, training);
  Var y = conv_bn_relu(tape, down1, batch, 2, training);
  for (int i = 3; i <= 5; ++i) y = relu(add(y, bn(tape, conv(tape, y, batch, i), i, training)));
  y = upsample_bilinear(y, batch.stencil_source[l - 1], batch.stencil_weight[l - 1]);
  y = conv_bn_relu(tape, concat_cols(y, down1), batch, 6, training);
  y = upsample_bilinear(y, batch.stencil_source[l], batch.stencil_weight[l]);
  y = conv_bn_relu(tape, concat_cols(y, stem), batch, 7, training);
  return linear(tape, y, 0);
}

void Model::write(std::ostream& out) const {
  nlohmann::json cfg{{"kind", kind_name(config_.kind)},
                     {"depth", config_.depth},
                     {"channels", config_.channels},
                     {"classes", config_.classes},
                     {"conv_bias", config_.conv_bias}};
  nlohmann::json layers = nlohmann::json::array();
  for (const ConvLayer& c : convs_) {
    layers.push_back({{"type", "mesh_conv"}, {"level", c.spec.level}, {"kernel", c.spec.kernel},
                      {"dilation", c.spec.dilation}, {"stride", c.spec.stride}, {"in", c.in}, {"out", c.out}});
  }
  cfg["layers"] = layers;
  const std::string text = cfg.dump();
  out.write("SDVC", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u32(out, static_cast<std::uint32_t>(params_.size() + 2 * bns_.size() + 2));
  for (const Parameter& p : params_) put_blob(out, p.name, p.value);
  for (std::size_t i = 0; i < bns_.size(); ++i) {
    put_blob(out, "bn" + std::to_string(i) + ".running_mean", bns_[i].stats.mean);
    put_blob(out, "bn" + std::to_string(i) + ".running_var", bns_[i].stats.var);
  }
  put_blob(out, "input.mean", input_mean);
  put_blob(out, "input.inv_std", input_inv_std);
}

Model Model::read(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SDVC") throw ParseError("not a checkpoint file", 0);
  const auto version = get_le(in, 4);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  const auto len = get_le(in, 4);
  if (len > (1u << 24)) throw ParseError("implausible checkpoint header", 0);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint", 0);
  ModelConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    const std::string kind = j.at("kind");
    if (kind != "classifier" && kind != "segmenter") throw ParseError("unknown model kind " + kind, 0);
    cfg.kind = kind == "classifier" ? ModelKind::Classifier : ModelKind::Segmenter;
    cfg.depth = j.at("depth");
    cfg.channels = j.at("channels").get<std::vector<int>>();
    cfg.classes = j.at("classes");
    cfg.conv_bias = j.at("conv_bias");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint header: ") + e.what(), 0);
  }
  Model model(cfg, 0);
  std::map<std::string, Matrix*> slots;
  for (Parameter& p : model.params_) slots[p.name] = &p.value;
  for (std::size_t i = 0; i < model.bns_.size(); ++i) {
    slots["bn" + std::to_string(i) + ".running_mean"] = &model.bns_[i].stats.mean;
    slots["bn" + std::to_string(i) + ".running_var"] = &model.bns_[i].stats.var;
  }
  slots["input.mean"] = &model.input_mean;
  slots["input.inv_std"] = &model.input_inv_std;
  const auto blobs = get_le(in, 4);
  std::set<std::string> filled;
  for (std::uint64_t b = 0; b < blobs; ++b) {
    const auto name_len = get_le(in, 4);
    if (name_len > 256) throw ParseError("implausible blob name", 0);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rows = get_le(in, 8), cols = get_le(in, 8);
    auto it = slots.find(name);
    if (it == slots.end()) throw ParseError("unexpected checkpoint blob " + name, 0);
    Matrix& m = *it->second;
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
      throw ParseError("checkpoint blob " + name + " has the wrong shape", 0);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_le(in, 8));
    filled.insert(name);
  }
  if (filled.size() != slots.size()) throw ParseError("checkpoint is missing blobs", 0);
  for (Parameter& p : model.params_) p.zero_grad();
  return model;
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
  if (!out) throw IoError("write failed: " + path.string());
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read(in);
}

Model build_classifier(int depth, std::vector<int> channels, int classes, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.kind = ModelKind::Classifier;
  cfg.depth = depth;
  cfg.channels = std::move(channels);
  cfg.classes = classes;
  return Model(std::move(cfg), seed);
}

Model build_segmenter(int depth, int input_channels, int width, int classes, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.kind = ModelKind::Segmenter;
  cfg.depth = depth;
  cfg.channels = {input_channels, width};
  cfg.classes = classes;
  return Model(std::move(cfg), seed);
}

}  // namespace subdivnet::nn
