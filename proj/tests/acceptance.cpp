// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "nn_helpers.h"
#include "oracles.h"
#include "subdivnet/obj_io.h"
#include "subdivnet/nn/model.h"
#include "subdivnet/nn/train.h"
#include "subdivnet/patterns.h"
#include "subdivnet/pipeline.h"
#include "subdivnet/remesh.h"
#include "subdivnet/shapes.h"

using namespace subdivnet;
using namespace subdivnet::nn;
using namespace nn_helpers;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr int kMinCorpusMeshes = 50;
constexpr double kPatternSeconds = 30;
constexpr double kHausdorff = 0.01;
constexpr int kHausdorffSamples = 10000;
constexpr double kReconstruction = 1e-9;
constexpr double kRemeshSeconds = 60;
constexpr double kBaryInside = 1e-9;
constexpr double kCoverage = 1e-6;
constexpr double kOracle = 1e-12;
constexpr double kFiniteDifference = 1e-5;
constexpr double kRelabel = 1e-9;
constexpr double kOperator = 1e-12;
constexpr double kClassifyAccuracy = 0.95;
constexpr int kClassifyEpochs = 15;
constexpr double kClassifySeconds = 600;
constexpr double kSegmentAccuracy = 0.97;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Remeshed synthetic spheres, boxes and tori; every level of every pyramid
/// counts as one mesh.
struct Corpus {
  std::vector<Mesh> raw;
  std::vector<DecimationOptions> options;
  std::vector<RemeshResult> remeshed;
  double seconds = 0;

  std::vector<const Mesh*> meshes() const {
    std::vector<const Mesh*> out;
    for (const auto& r : remeshed) {
      for (int l = 0; l <= r.pyramid.depth(); ++l) out.push_back(&r.pyramid.level(l));
    }
    return out;
  }
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Timer timer;
    Corpus c;
    const int counts[] = {5, 4, 4};
    for (int cls = 0; cls < 3; ++cls) {
      for (int i = 0; i < counts[cls]; ++i) {
        const std::uint64_t seed = 100 * cls + i + 1;
        Mesh raw = pipeline::synth_shape(cls, 1500, seed);
        for (int attempt = 0; attempt < 5; ++attempt) {
          DecimationOptions opt;
          opt.seed = seed * 7 + attempt;
          RemeshResult r = remesh(raw, 48, 3, opt);
          if (!r.reached_target) continue;
          c.raw.push_back(raw);
          c.options.push_back(opt);
          c.remeshed.push_back(std::move(r));
          break;
        }
      }
    }
    c.seconds = timer.seconds();
    return c;
  }();
  return c;
}

Outcome pattern_size_law() {
  Timer timer;
  const auto meshes = corpus().meshes();
  long faces = 0, bad = 0;
  for (const Mesh* m : meshes) {
    const auto graph = oracle::face_graph(*m);
    const auto val = oracle::valences(*m);
    for (int f = 0; f < m->face_count(); ++f, ++faces) {
      const auto dist = oracle::distances_from(graph, f);
      std::set<int> ring, ball;
      bool regular = true;
      for (int g = 0; g < m->face_count(); ++g) {
        if (dist[g] == 1) ring.insert(g);
        if (dist[g] == 1 || dist[g] == 2) {
          ball.insert(g);
          for (int v : m->face(g)) regular = regular && val[v] == 6;
        }
      }
      for (int k : {3, 5}) {
        const int half = (k - 1) / 2;
        const auto p = kernel_pattern(*m, f, k);
        bool ok = static_cast<int>(p.size()) == 3 * ((1 << half) - 1);
        for (int g : p) ok = ok && dist[g] >= 0 && dist[g] <= half;
        const std::set<int> members(p.begin(), p.end());
        ok = ok && std::includes(members.begin(), members.end(), ring.begin(), ring.end());
        if (k == 3) ok = ok && members == ring;
        if (k == 5 && regular) ok = ok && members == ball;
        bad += !ok;
      }
    }
  }
  const double s = timer.seconds();
  const bool pass = static_cast<int>(meshes.size()) >= kMinCorpusMeshes && bad == 0 && s + corpus().seconds < kPatternSeconds;
  return {pass, fmt("%zu meshes, %ld faces, %ld violations, %.1f s (+%.1f s remeshing)", meshes.size(), faces, bad, s,
                    corpus().seconds)};
}

Outcome duplication_locality() {
  long duplicates = 0, bad = 0;
  for (const Mesh* m : corpus().meshes()) {
    const auto val = oracle::valences(*m);
    for (int f = 0; f < m->face_count(); ++f) {
      const auto p = kernel_pattern(*m, f, 5);
      const std::multiset<int> seen(p.begin(), p.end());
      for (int g : p) {
        if (seen.count(g) < 2) continue;
        ++duplicates;
        bool low = false;
        for (int v : m->face(g)) low = low || val[v] <= 4;
        bad += !low;
      }
    }
  }
  return {bad == 0, fmt("%ld duplicate entries, %ld away from valence <= 4", duplicates, bad)};
}

Outcome dilation_distance() {
  std::map<int, long> checked;
  long bad = 0;
  for (const Mesh* m : corpus().meshes()) {
    const auto graph = oracle::face_graph(*m);
    const auto val = oracle::valences(*m);
    for (int f = 0; f < m->face_count(); ++f) {
      const auto dist = oracle::distances_from(graph, f);
      for (int d : {1, 2, 3}) {
        bool regular = true;
        for (int g = 0; g < m->face_count() && regular; ++g) {
          if (dist[g] < 0 || dist[g] > d) continue;
          for (int v : m->face(g)) regular = regular && val[v] == 6;
        }
        if (!regular) continue;
        ++checked[d];
        for (Parity parity : {Parity::ZigFirst, Parity::ZagFirst}) {
          for (int g : dilated_pattern(*m, f, d, parity)) bad += dist[g] != d;
        }
      }
    }
  }
  const bool pass = bad == 0 && checked[1] > 0 && checked[2] > 0 && checked[3] > 0;
  return {pass, fmt("regular centers d=1: %ld, d=2: %ld, d=3: %ld; %ld off-distance entries", checked[1], checked[2],
                    checked[3], bad)};
}

const Mesh& unit_sphere() {
  static const Mesh m = [] {
    const Mesh s = shapes::cube_sphere(29);
    const double scale = 1.0 / bounding_box_diagonal(s);
    std::vector<Vec3> p(s.vertices());
    for (Vec3& v : p) v = v * scale;
    return s.with_positions(std::move(p));
  }();
  return m;
}

Outcome pyramid_law() {
  long bad = 0;
  for (const auto& r : corpus().remeshed) {
    const MeshPyramid& p = r.pyramid;
    const auto chi = validate_closed_manifold(p.base()).euler_characteristic;
    bad += !check_pyramid(p).empty();
    for (int l = 1; l <= p.depth(); ++l) {
      bad += p.level(l).face_count() != 4 * p.level(l - 1).face_count();
      const MeshStats s = validate_closed_manifold(p.level(l));
      bad += !s.is_closed_manifold || s.euler_characteristic != chi;
    }
  }
  DecimationOptions opt;
  opt.seed = 1;
  const RemeshResult r = remesh(unit_sphere(), 48, 4, opt);
  const int base = r.pyramid.base().face_count(), fine = r.pyramid.finest().face_count();
  const bool pass = bad == 0 && r.pyramid.depth() == 4 && base == 48 && fine == 12288;
  return {pass, fmt("%zu pyramids, %ld violations; base %d depth 4 -> %d faces", corpus().remeshed.size(), bad, base, fine)};
}

std::vector<Vec3> sample_surface(const Mesh& mesh, int n, std::mt19937_64& rng) {
  std::vector<double> cumulative;
  double total = 0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.face(f);
    total += 0.5 * norm(cross(mesh.position(t[1]) - mesh.position(t[0]), mesh.position(t[2]) - mesh.position(t[0])));
    cumulative.push_back(total);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) {
    const int f = static_cast<int>(std::lower_bound(cumulative.begin(), cumulative.end(), u(rng) * total) - cumulative.begin());
    double a = u(rng), b = u(rng);
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const Face& t = mesh.face(std::min(f, mesh.face_count() - 1));
    out.push_back((1 - a - b) * mesh.position(t[0]) + a * mesh.position(t[1]) + b * mesh.position(t[2]));
  }
  return out;
}

Outcome remesh_fidelity() {
  const Mesh& sphere = unit_sphere();
  Timer timer;
  DecimationOptions opt;
  opt.seed = 1;
  const RemeshResult r = remesh(sphere, 48, 3, opt);
  const double seconds = timer.seconds();
  const Mesh& fine = r.pyramid.finest();
  std::mt19937_64 rng(5);
  double hausdorff = 0;
  for (const Vec3& p : sample_surface(sphere, kHausdorffSamples, rng)) hausdorff = std::max(hausdorff, oracle::surface_distance(fine, p));
  for (const Vec3& p : sample_surface(fine, kHausdorffSamples, rng)) hausdorff = std::max(hausdorff, oracle::surface_distance(sphere, p));
  double recon = 0;
  for (int v = 0; v < fine.vertex_count(); ++v) {
    const SurfacePoint& s = r.finest_sources[v];
    const Face& t = sphere.face(s.face);
    const Vec3 q = s.bary[0] * sphere.position(t[0]) + s.bary[1] * sphere.position(t[1]) + s.bary[2] * sphere.position(t[2]);
    recon = std::max(recon, norm(q - fine.position(v)));
  }
  const bool pass = r.reached_target && hausdorff < kHausdorff && recon <= kReconstruction && seconds < kRemeshSeconds;
  return {pass, fmt("%d -> %d faces, diagonal %.6f, Hausdorff %.5f, reconstruction %.2e, remesh %.1f s", sphere.face_count(),
                    fine.face_count(), bounding_box_diagonal(sphere), hausdorff, recon, seconds)};
}

double bary_area(const std::array<Bary, 3>& b) {
  return (b[1][1] - b[0][1]) * (b[2][2] - b[0][2]) - (b[1][2] - b[0][2]) * (b[2][1] - b[0][1]);
}

bool inside(const Bary& b) {
  for (double x : b) {
    if (x < -kBaryInside || x > 1 + kBaryInside) return false;
  }
  return std::abs(b[0] + b[1] + b[2] - 1) <= kBaryInside;
}

Outcome flip_free() {
  long fragments = 0, bad = 0, uncovered = 0;
  std::vector<const Mesh*> inputs{&unit_sphere()};
  std::vector<DecimationOptions> options{DecimationOptions{}};
  options[0].seed = 1;
  for (std::size_t i = 0; i < corpus().raw.size(); ++i) {
    inputs.push_back(&corpus().raw[i]);
    options.push_back(corpus().options[i]);
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const DecimationResult r = decimate_to_base(*inputs[i], 48, options[i]);
    std::vector<double> covered(inputs[i]->face_count(), 0.0);
    for (const auto& host : r.fragments) {
      for (const Fragment& fr : host) {
        ++fragments;
        const bool ok = inside(fr.host_bary[0]) && inside(fr.host_bary[1]) && inside(fr.host_bary[2]) && bary_area(fr.host_bary) > 0;
        bad += !ok;
        covered[fr.original_face] += bary_area(fr.orig_bary);
      }
    }
    for (double c : covered) uncovered += std::abs(c - 1) > kCoverage;
  }
  return {bad == 0 && uncovered == 0,
          fmt("%zu decimations, %ld fragments, %ld spanning or flipped, %ld original faces not covered once", inputs.size(),
              fragments, bad, uncovered)};
}

Outcome conv_correctness() {
  std::mt19937_64 rng(7);
  double forward = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int c = 1 + trial % 4, out = 1 + (trial / 4) % 3, len = trial % 2 ? 3 : 9;
    const Neighborhood nb = random_neighborhood(12, 5, len, rng);
    const Matrix x = random_matrix(12, c, rng);
    std::array<Matrix, 4> w;
    for (auto& m : w) m = random_matrix(c, out, rng);
    const Matrix b = random_matrix(1, out, rng);
    Tape t;
    forward = std::max(forward, (conv_of(t, t.constant(x), nb, w, b).value() - conv_oracle(x, nb, w, b)).cwiseAbs().maxCoeff());
  }
  double backward = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 1 + trial % 3, out = 1 + trial % 4;
    const Neighborhood nb = random_neighborhood(10, 6, trial % 2 ? 3 : 9, rng);
    std::vector<Matrix> inputs{random_matrix(10, c, rng)};
    for (int k = 0; k < 4; ++k) inputs.push_back(random_matrix(c, out, rng));
    inputs.push_back(random_matrix(1, out, rng));
    backward = std::max(backward, gradient_error(inputs, [&](Tape&, const std::vector<Var>& v) {
      return mesh_conv(v[0], nb, {v[1], v[2], v[3], v[4]}, v[5]);
    }, trial));
  }
  return {forward <= kOracle && backward < kFiniteDifference,
          fmt("oracle max error %.2e over 1000 neighborhoods, finite-difference max relative error %.2e over 100 layers",
              forward, backward)};
}

Outcome order_invariance() {
  std::mt19937_64 rng(13);
  long rows = 0, unstable = 0;
  const auto& remeshed = corpus().remeshed;
  for (std::size_t i = 0; i < remeshed.size(); i += 3) {
    const Mesh& m = remeshed[i].pyramid.finest();
    for (const auto& [k, d] : std::vector<std::pair<int, int>>{{3, 1}, {3, 2}, {5, 1}}) {
      const Neighborhood nb = from_buffer(compile_index_buffer(m, k, d));
      const Matrix x = random_matrix(m.face_count(), 5, rng);
      std::array<Matrix, 4> w;
      for (auto& mat : w) mat = random_matrix(5, 4, rng);
      const Matrix b = random_matrix(1, 4, rng);
      Neighborhood rotated = nb, reversed = nb;
      const int len = nb.row_length;
      std::uniform_int_distribution<int> shift(1, len - 1);
      for (int r = 0; r < nb.rows(); ++r) {
        auto row = rotated.index.begin() + r * len;
        std::rotate(row, row + shift(rng), row + len);
        std::reverse(reversed.index.begin() + r * len, reversed.index.begin() + (r + 1) * len);
      }
      Tape t;
      const Matrix base = conv_of(t, t.constant(x), nb, w, b).value();
      const Matrix a = conv_of(t, t.constant(x), rotated, w, b).value();
      const Matrix c = conv_of(t, t.constant(x), reversed, w, b).value();
      for (int r = 0; r < nb.rows(); ++r, ++rows) unstable += !(a.row(r) == base.row(r) && c.row(r) == base.row(r));
    }
  }

  std::vector<Sample> samples, permuted;
  for (std::size_t i = 0; i < remeshed.size(); i += 4) {
    const MeshPyramid& p = remeshed[i].pyramid;
    std::vector<std::vector<int>> perm(p.depth() + 1);
    for (int l = 0; l <= p.depth(); ++l) {
      perm[l].resize(p.level(l).face_count());
      std::iota(perm[l].begin(), perm[l].end(), 0);
      std::shuffle(perm[l].begin(), perm[l].end(), rng);
    }
    Sample a = make_sample(p, 0, "a");
    Sample b;
    b.pyramid = permute_faces(p, perm);
    b.features = FeatureTensor(a.features.rows(), a.features.cols());
    for (int f = 0; f < a.features.rows(); ++f) {
      for (int c = 0; c < a.features.cols(); ++c) b.features(f, c) = a.features(perm.back()[f], c);
    }
    b.label = 0;
    samples.push_back(std::move(a));
    permuted.push_back(std::move(b));
  }
  Model model = build_classifier(3, {13, 16, 32, 64}, 3, 9);
  model.fit_input_normalization(samples);
  const auto specs = model.conv_specs();
  double relabel = 0;
  for (bool training : {false, true}) {
    Tape t1, t2;
    const Matrix a = model.forward(t1, make_batch(pointers(samples), specs), training).value();
    const Matrix b = model.forward(t2, make_batch(pointers(permuted), specs), training).value();
    relabel = std::max(relabel, (a - b).cwiseAbs().maxCoeff());
  }
  return {unstable == 0 && relabel < kRelabel,
          fmt("%ld conv rows, %ld not bitwise stable; relabeled logits max difference %.2e over %zu shapes", rows, unstable,
              relabel, samples.size())};
}

Outcome operator_algebra() {
  std::mt19937_64 rng(21);
  long exact_failures = 0;
  double constant = 0, mean = 0;
  for (const auto& r : corpus().remeshed) {
    const MeshPyramid& p = r.pyramid;
    for (int l = 1; l <= p.depth(); ++l) {
      const FaceMap& map = p.face_map(l);
      const int coarse = p.level(l - 1).face_count(), fine = p.level(l).face_count();
      Tape t;
      const Matrix x = random_matrix(coarse, 4, rng);
      const Var up = upsample_nearest(t.constant(x), map.parent_of);
      exact_failures += !(mean_pool(up, map.children).value() == x);

      const BilinearStencil st = bilinear_stencil(map, p.level(l));
      const Matrix c = Matrix::Constant(coarse, 3, 0.7310585786300049);
      const Matrix b = upsample_bilinear(t.constant(c), st.source, st.weight).value();
      constant = std::max(constant, (b.array() - c(0, 0)).abs().maxCoeff());

      const Matrix y = random_matrix(fine, 4, rng);
      const Matrix pooled = mean_pool(t.constant(y), map.children).value();
      mean = std::max(mean, (pooled.colwise().mean() - y.colwise().mean()).cwiseAbs().maxCoeff());

      FeatureTensor fx(coarse, 4);
      for (int f = 0; f < coarse; ++f) {
        for (int c = 0; c < 4; ++c) fx(f, c) = x(f, c);
      }
      exact_failures += pool(upsample_nearest(fx, map), map, PoolMode::Mean).data() != fx.data();
    }
  }
  return {exact_failures == 0 && constant <= kOperator && mean <= kOperator,
          fmt("mean_pool(upsample_nearest) mismatches %ld; bilinear constant error %.2e; global mean error %.2e",
              exact_failures, constant, mean)};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("subdivnet_acceptance_" + name);
  fs::remove_all(dir);
  return dir;
}

Outcome classification() {
  Timer timer;
  pipeline::SynthOptions so;
  so.train_per_class = 20;
  so.test_per_class = 10;
  so.variants = 3;
  so.depth = 3;
  so.seed = 1;
  const auto manifest = pipeline::generate_synthetic(scratch("classify"), so);
  const auto train_set = pipeline::load_samples(manifest, "train");
  const auto test_set = pipeline::load_samples(manifest, "test");
  pipeline::TrainConfig config;
  config.channels = {13, 16, 32, 64};
  config.options.learning_rate = 0.002;
  config.options.epochs = kClassifyEpochs;
  Model model = pipeline::build_model(manifest, so.depth, config);
  train(model, train_set, config.options);
  const Evaluation plain = evaluate(model, test_set, false);
  const Evaluation voted = evaluate(model, test_set, true);
  const double seconds = timer.seconds();
  const bool pass = plain.accuracy >= kClassifyAccuracy && voted.accuracy >= plain.accuracy && seconds < kClassifySeconds;
  return {pass, fmt("%zu train / %zu test variants, %d epochs: accuracy %.4f, voted %.4f over %d shapes, %.0f s",
                    train_set.size(), test_set.size(), kClassifyEpochs, plain.accuracy, voted.accuracy, voted.count, seconds)};
}

Outcome segmentation() {
  pipeline::SynthOptions so;
  so.task = Task::Segment;
  so.train_per_class = 30;
  so.test_per_class = 6;
  so.variants = 1;
  so.depth = 3;
  so.seed = 2;
  const auto manifest = pipeline::generate_synthetic(scratch("segment"), so);
  const auto train_set = pipeline::load_samples(manifest, "train");
  const auto test_set = pipeline::load_samples(manifest, "test");
  pipeline::TrainConfig config;
  config.options.learning_rate = 0.003;
  config.options.epochs = 30;
  config.options.batch_size = 4;
  Model model = pipeline::build_model(manifest, so.depth, config);
  train(model, train_set, config.options);
  const Evaluation e = evaluate(model, test_set, false);

  // Carry predictions back to each raw mesh and compare with the true split.
  const auto predictions = predict(model, test_set);
  long raw_faces = 0, outside_band = 0;
  std::size_t s = 0;
  for (const auto& entry : manifest.entries) {
    if (entry.split != "test") continue;
    const Mesh raw = load_obj(entry.obj);
    const Mesh& fine = test_set[s].pyramid.finest();
    std::vector<double> edges;
    for (const auto& [u, v] : unique_edges(fine)) edges.push_back(norm(fine.position(u) - fine.position(v)));
    std::nth_element(edges.begin(), edges.begin() + edges.size() / 2, edges.end());
    const double band = edges[edges.size() / 2];
    const auto labels = transfer_labels(fine, predictions[s], raw);
    for (int f = 0; f < raw.face_count(); ++f, ++raw_faces) {
      const double z = raw.centroid(f).z;
      if (labels[f] != (z > 0 ? 1 : 0) && std::abs(z) > band) ++outside_band;
    }
    ++s;
  }
  return {e.accuracy >= kSegmentAccuracy && outside_band == 0,
          fmt("per-face accuracy %.4f over %d faces; %ld of %ld raw faces mislabeled outside the median-edge band",
              e.accuracy, e.count, outside_band, raw_faces)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"pattern-size law", pattern_size_law},
      {"duplication locality", duplication_locality},
      {"dilation distance on regular regions", dilation_distance},
      {"pyramid law", pyramid_law},
      {"remeshing fidelity", remesh_fidelity},
      {"flip-free parameterization", flip_free},
      {"convolution correctness", conv_correctness},
      {"order invariance", order_invariance},
      {"operator algebra", operator_algebra},
      {"end-to-end classification", classification},
      {"segmentation", segmentation},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
