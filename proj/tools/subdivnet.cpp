#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "subdivnet/error.h"
#include "subdivnet/features.h"
#include "subdivnet/obj_io.h"
#include "subdivnet/patterns.h"
#include "subdivnet/pipeline.h"
#include "subdivnet/pyramid_io.h"

using namespace subdivnet;
namespace fs = std::filesystem;

namespace {

/// Re-throws domain errors with the offending path in front.
template <typename F>
auto in_file(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Mesh read_mesh(const fs::path& path) {
  return in_file(path, [&] { return load_obj(path); });
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

int cmd_check(const fs::path& input) {
  const Mesh mesh = read_mesh(input);
  const MeshStats s = validate_closed_manifold(mesh);
  nlohmann::json report{{"vertices", s.vertex_count},          {"edges", s.edge_count},
                        {"faces", s.face_count},               {"euler_characteristic", s.euler_characteristic},
                        {"closed_manifold", s.is_closed_manifold}, {"connected", s.is_connected}};
  if (s.is_closed_manifold) report["genus"] = s.genus;
  std::cout << report.dump(2) << '\n';
  return s.is_closed_manifold ? 0 : 1;
}

struct RemeshArgs {
  fs::path input, out;
  int base = 48, depth = 4, relax = 10;
  std::string method = "maps";
  std::uint64_t seed = 0;
};

int cmd_remesh(const RemeshArgs& a) {
  const Mesh mesh = read_mesh(a.input);
  DecimationOptions opt;
  opt.method = parse_method(a.method);
  opt.seed = a.seed;
  opt.relax_iterations = a.relax;
  fs::create_directories(a.out);
  const RemeshResult r = pipeline::remesh_to_directory(mesh, a.base, a.depth, opt, a.out);
  if (!r.reached_target) {
    std::cerr << "error: " << r.message << '\n';
    return 1;
  }
  std::cout << r.message << "; " << a.depth + 1 << " levels written to " << a.out.string() << '\n';
  return 0;
}

struct CompileArgs {
  fs::path pyramid, out;
  int level = -1, k = 3, d = 1, stride = 1;
  std::string parity = "zig";
  bool json = false;
};

int cmd_compile(const CompileArgs& a) {
  const MeshPyramid p = load_pyramid(a.pyramid);
  const int level = a.level < 0 ? p.depth() : a.level;
  const Parity parity = a.parity == "zag" ? Parity::ZagFirst : Parity::ZigFirst;
  const KernelIndexBuffer buf = compile_index_buffer(p, level, a.k, a.d, a.stride, parity);
  if (a.json) {
    write_text(a.out, index_buffer_json(buf));
  } else {
    save_index_buffer(buf, a.out);
  }
  std::cout << buf.rows() << " rows of length " << buf.row_length << " written to " << a.out.string() << '\n';
  return 0;
}

int cmd_features(const fs::path& input, const fs::path& out, bool normalize) {
  Mesh mesh = fs::is_directory(input) ? load_pyramid(input).finest() : read_mesh(input);
  if (normalize) mesh = normalize_unit_cube(mesh);
  const FaceFeatures f = compute_features(mesh);
  save_features(f.values, out);
  std::cout << f.values.rows() << " x " << f.values.cols() << " features written to " << out.string() << '\n';
  return 0;
}

nn::Task parse_task(const std::string& s) { return s == "segment" ? nn::Task::Segment : nn::Task::Classify; }

int cmd_gen_synth(const fs::path& out, const std::string& task, pipeline::SynthOptions opt) {
  opt.task = parse_task(task);
  const auto m = pipeline::generate_synthetic(out, opt);
  std::size_t variants = 0;
  for (const auto& e : m.entries) variants += e.variants.size();
  std::cout << m.entries.size() << " shapes, " << variants << " remeshed variants; manifest "
            << (out / "manifest.json").string() << '\n';
  return 0;
}

struct TrainArgs {
  fs::path manifest, config, out, log;
  std::string task;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
};

int cmd_train(const TrainArgs& a) {
  const auto manifest = pipeline::load_manifest(a.manifest);
  if (!a.task.empty() && parse_task(a.task) != manifest.task) throw Error("--task does not match the manifest task");
  pipeline::TrainConfig cfg;
  if (!a.config.empty()) cfg = pipeline::train_config(in_file(a.config, [&] { return pipeline::load_config(a.config); }));
  std::map<std::string, std::string> overrides;
  if (a.seed) overrides["seed"] = std::to_string(*a.seed);
  if (a.epochs) overrides["epochs"] = std::to_string(*a.epochs);
  if (a.batch_size) overrides["batch_size"] = std::to_string(*a.batch_size);
  if (a.lr) overrides["learning_rate"] = std::to_string(*a.lr);
  if (a.optimizer) overrides["optimizer"] = *a.optimizer;
  cfg = pipeline::train_config(overrides, cfg);

  const auto samples = pipeline::load_samples(manifest, "train");
  if (samples.empty()) throw Error("manifest has no training shapes");
  nn::Model model = pipeline::build_model(manifest, samples[0].pyramid.depth(), cfg);
  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw IoError("cannot write " + a.log.string());
  }
  nn::train(model, samples, cfg.options, [&](const nn::EpochLog& e) {
    const std::string line = nn::to_json_line(e);
    std::cout << line << '\n';
    if (log.is_open()) log << line << '\n';
  });
  model.save(a.out);
  return 0;
}

int cmd_eval(const fs::path& manifest_path, const fs::path& checkpoint, bool vote, const std::string& split,
             const fs::path& out) {
  const auto manifest = pipeline::load_manifest(manifest_path);
  nn::Model model = in_file(checkpoint, [&] { return nn::Model::load(checkpoint); });
  if (model.task() != manifest.task) throw Error("checkpoint task does not match the manifest task");
  const auto samples = pipeline::load_samples(manifest, split);
  if (samples.empty()) throw Error("no shapes in split " + split);
  const std::string metrics = nn::to_json(nn::evaluate(model, samples, vote));
  std::cout << metrics << '\n';
  if (!out.empty()) write_text(out, metrics);
  return 0;
}

int cmd_export_seg(const fs::path& mesh_path, const fs::path& pyramid_dir, const fs::path& predictions,
                   const fs::path& checkpoint, const fs::path& out) {
  const Mesh raw = read_mesh(mesh_path);
  nn::Sample s;
  s.pyramid = load_pyramid(pyramid_dir);
  std::vector<int> labels;
  if (!predictions.empty()) {
    labels = in_file(predictions, [&] { return pipeline::read_labels(predictions); });
  } else {
    nn::Model model = in_file(checkpoint, [&] { return nn::Model::load(checkpoint); });
    if (model.task() != nn::Task::Segment) throw Error("export-seg needs a segmentation checkpoint");
    s.features = nn::pyramid_features(s.pyramid);
    labels = nn::predict(model, std::span<const nn::Sample>(&s, 1))[0];
  }
  if (static_cast<int>(labels.size()) != s.pyramid.finest().face_count()) {
    throw ShapeError("prediction count does not match the finest level");
  }
  const auto raw_labels = transfer_labels(s.pyramid.finest(), labels, raw);
  save_obj(raw, out, std::span<const int>(raw_labels));
  std::cout << raw.face_count() << " labelled faces written to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subdivision-based mesh convolution toolkit"};
  app.require_subcommand(1);

  fs::path check_in;
  auto* check = app.add_subcommand("check", "Validate a closed 2-manifold OBJ (exit 0 iff valid)");
  check->add_option("input", check_in, "OBJ file")->required();

  RemeshArgs rm;
  auto* remesh = app.add_subcommand("remesh", "Remesh to subdivision connectivity");
  remesh->add_option("input", rm.input, "OBJ file")->required();
  remesh->add_option("--base", rm.base, "Base mesh face count")->capture_default_str();
  remesh->add_option("--depth", rm.depth, "Subdivision depth")->capture_default_str();
  remesh->add_option("--method", rm.method, "maps or liu")->check(CLI::IsMember({"maps", "liu"}))->capture_default_str();
  remesh->add_option("--seed", rm.seed, "Random seed")->capture_default_str();
  remesh->add_option("--relax", rm.relax, "Surface relaxation passes")->capture_default_str();
  remesh->add_option("--out", rm.out, "Output pyramid directory")->required();

  CompileArgs cp;
  auto* compile = app.add_subcommand("compile", "Compile a kernel index buffer");
  compile->add_option("pyramid", cp.pyramid, "Pyramid directory")->required();
  compile->add_option("--level", cp.level, "Input level (default finest)");
  compile->add_option("--k", cp.k, "Kernel size")->check(CLI::IsMember({3, 5, 7}))->capture_default_str();
  compile->add_option("--d", cp.d, "Dilation")->check(CLI::PositiveNumber)->capture_default_str();
  compile->add_option("--stride", cp.stride, "1 or 2")->check(CLI::IsMember({1, 2}))->capture_default_str();
  compile->add_option("--parity", cp.parity, "zig or zag")->check(CLI::IsMember({"zig", "zag"}))->capture_default_str();
  compile->add_flag("--json", cp.json, "Write the JSON form");
  compile->add_option("--out", cp.out, "Output file")->required();

  fs::path feat_in, feat_out;
  bool no_normalize = false;
  auto* features = app.add_subcommand("features", "Compute per-face input features");
  features->add_option("input", feat_in, "OBJ file or pyramid directory (finest level)")->required();
  features->add_option("--out", feat_out, "Output .sdvf file")->required();
  features->add_flag("--no-normalize", no_normalize, "Skip unit-cube normalization");

  fs::path synth_out;
  std::string synth_task = "classify";
  pipeline::SynthOptions so;
  auto* synth = app.add_subcommand("gen-synth", "Generate the synthetic sphere/box/torus dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--task", synth_task, "classify or segment")->check(CLI::IsMember({"classify", "segment"}))->capture_default_str();
  synth->add_option("--train-per-class", so.train_per_class)->capture_default_str();
  synth->add_option("--test-per-class", so.test_per_class)->capture_default_str();
  synth->add_option("--variants", so.variants, "Remeshed variants per shape")->capture_default_str();
  synth->add_option("--base", so.base_size)->capture_default_str();
  synth->add_option("--depth", so.depth)->capture_default_str();
  synth->add_option("--raw-faces", so.raw_faces)->capture_default_str();
  synth->add_option("--seed", so.seed)->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train on a dataset manifest");
  train->add_option("--manifest", tr.manifest)->required();
  train->add_option("--task", tr.task, "classify or segment (must match the manifest)")->check(CLI::IsMember({"classify", "segment"}));
  train->add_option("--config", tr.config, "key = value config file");
  train->add_option("--seed", tr.seed);
  train->add_option("--epochs", tr.epochs);
  train->add_option("--batch-size", tr.batch_size);
  train->add_option("--lr", tr.lr);
  train->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--log", tr.log, "JSONL training log");
  train->add_option("--out", tr.out, "Checkpoint file")->required();

  fs::path ev_manifest, ev_ckpt, ev_out;
  bool vote = false;
  std::string split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--manifest", ev_manifest)->required();
  eval->add_option("--checkpoint", ev_ckpt)->required();
  eval->add_flag("--vote", vote, "Majority vote over remeshed variants");
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  eval->add_option("--out", ev_out, "Metrics JSON file");

  fs::path ex_mesh, ex_pyr, ex_pred, ex_ckpt, ex_out;
  auto* exp = app.add_subcommand("export-seg", "Carry finest-level labels back to a raw mesh as a colored OBJ");
  exp->add_option("--mesh", ex_mesh, "Raw OBJ")->required();
  exp->add_option("--pyramid", ex_pyr, "Remeshed pyramid of the raw mesh")->required();
  auto* pred_opt = exp->add_option("--predictions", ex_pred, "Labels per finest face, one per line");
  auto* ckpt_opt = exp->add_option("--checkpoint", ex_ckpt, "Segmentation checkpoint");
  pred_opt->excludes(ckpt_opt);
  exp->add_option("--out", ex_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (*exp && ex_pred.empty() && ex_ckpt.empty()) {
    std::cerr << "export-seg: one of --predictions or --checkpoint is required\n";
    return 2;
  }

  try {
    if (*check) return cmd_check(check_in);
    if (*remesh) return cmd_remesh(rm);
    if (*compile) return cmd_compile(cp);
    if (*features) return cmd_features(feat_in, feat_out, !no_normalize);
    if (*synth) return cmd_gen_synth(synth_out, synth_task, so);
    if (*train) return cmd_train(tr);
    if (*eval) return cmd_eval(ev_manifest, ev_ckpt, vote, split, ev_out);
    if (*exp) return cmd_export_seg(ex_mesh, ex_pyr, ex_pred, ex_ckpt, ex_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
