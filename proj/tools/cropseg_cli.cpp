// Copyright 2026 The cropseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: segment, synth, corrupt, eval, oracle-vis.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cropseg/error.hpp"
#include "cropseg/io/dataset.hpp"
#include "cropseg/metrics.hpp"
#include "cropseg/pipeline.hpp"
#include "cropseg/rng.hpp"
#include "cropseg/synth.hpp"

namespace fs = std::filesystem;
using namespace cropseg;

namespace {

struct SegmentArgs {
  std::string crop, env, cameras, masks, out, config;
  std::optional<int> k, min_points, workers;
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  bool whole_cloud = false;
  bool dump = false;
};

int run_segment(const SegmentArgs& a) {
  PipelineConfig config;
  if (!a.config.empty()) config = config_from_json(io::read_json(a.config));
  if (a.k) config.k = *a.k;
  if (a.eps) config.eps = *a.eps;
  if (a.min_points) config.min_points = *a.min_points;
  if (a.seed) config.seed = *a.seed;
  if (a.variant) config.variant = parse_merge_variant(*a.variant);
  if (a.workers) config.workers = *a.workers;
  if (a.whole_cloud) config.superclusters = false;
  config.validate();

  const Dataset dataset = io::load_dataset(a.crop, a.env, a.cameras, a.masks);
  const PipelineResult result = run_pipeline(config, dataset);

  fs::create_directories(a.out);
  io::write_json(fs::path(a.out) / "report.json", report_to_json(result, config));
  const auto labels = point_labels(result.report);
  io::write_point_cloud(fs::path(a.out) / "labeled.ply", dataset.crop_cloud, &labels);
  if (a.dump) {
    for (std::size_t s = 0; s < result.tables.size(); ++s) {
      std::ofstream scores(fs::path(a.out) / ("scores_" + std::to_string(s) + ".tsv"));
      write_score_table(scores, result.tables[s]);
      std::ofstream graph(fs::path(a.out) / ("graph_" + std::to_string(s) + ".txt"));
      write_edge_list(graph, build_affinity_graph(result.tables[s], config.variant));
    }
  }
  std::cout << "total_count " << result.report.total << "\n";
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out, int workers) {
  const synth::SceneSpec spec =
      spec_path.empty() ? synth::SceneSpec{} : io::scene_spec_from_json(io::read_json(spec_path));
  const synth::Scene scene = synth::generate_scene(spec, workers);
  io::save_dataset(out, scene.dataset);
  io::write_json(fs::path(out) / io::kTruthFile, io::truth_to_json(scene.truth));
  std::cout << "instances " << scene.truth.count << " views " << scene.dataset.views.size()
            << " crop_points " << scene.dataset.crop_cloud.size() << "\n";
  return 0;
}

int run_corrupt(const std::string& in, const std::string& spec_path, const std::string& out) {
  const auto spec = io::corruption_spec_from_json(io::read_json(spec_path));
  const Dataset ds = io::load_dataset(in);
  const fs::path truth_path = fs::path(in) / io::kTruthFile;
  synth::GroundTruth truth;
  if (fs::exists(truth_path)) truth = io::truth_from_json(io::read_json(truth_path));
  std::vector<InstanceMask> masks;
  for (const auto& v : ds.views) masks.push_back(v.mask);
  const auto result = synth::corrupt_masks(masks, truth, spec);

  Dataset corrupted = ds;
  for (std::size_t j = 0; j < corrupted.views.size(); ++j) corrupted.views[j].mask = result.masks[j];
  io::save_dataset(out, corrupted);
  if (fs::exists(truth_path)) {
    fs::copy_file(truth_path, fs::path(out) / io::kTruthFile, fs::copy_options::overwrite_existing);
  }
  io::write_json(fs::path(out) / "corruption_log.json", io::corruption_log_to_json(result.log));
  std::cout << "events " << result.log.size() << " corrupted_views "
            << result.corrupted_views().size() << "\n";
  return 0;
}

double read_count(const std::string& path, const char* key) {
  const auto doc = io::read_json(path);
  if (!doc.contains(key) || !doc.at(key).is_number()) {
    throw DataError(path + " has no numeric '" + key + "'");
  }
  return doc.at(key).get<double>();
}

int run_eval(const std::vector<std::string>& preds, const std::vector<std::string>& truths) {
  std::vector<double> p;
  std::vector<double> t;
  for (const auto& path : preds) p.push_back(read_count(path, "total_count"));
  for (const auto& path : truths) t.push_back(read_count(path, "count"));
  const EvalResult r = evaluate(p, t);
  nlohmann::json out = {{"predicted", r.predicted}, {"truth", r.truth}, {"rmse", r.rmse},
                        {"mape", r.mape}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_oracle(const std::string& in, int samples, int supersample, std::uint64_t seed, int k) {
  const Dataset ds = io::load_dataset(in);
  const double radius = estimate_point_radius(ds.env_cloud);
  const double tolerance = 2.0 * radius;
  std::vector<Subcluster> subclusters;
  for (const auto& sc : dbscan_superclusters(ds.crop_cloud, kDefaultEps, kDefaultMinPoints)) {
    for (auto& s : kmeans_subclusters(sc, k, seed)) subclusters.push_back(std::move(s));
  }
  if (subclusters.empty()) throw DataError("no subclusters to check");
  const auto buffers = build_view_buffers(ds, radius);
  Rng rng(seed);
  double worst = 0.0;
  int done = 0;
  std::printf("view\tsubcluster\tscore\toracle\tdiff\n");
  for (int attempt = 0; attempt < samples * 50 && done < samples; ++attempt) {
    const std::size_t j = rng.below(ds.views.size());
    const std::size_t i = rng.below(subclusters.size());
    const auto& cam = ds.views[j].camera;
    const Footprint free = splat_footprint(cam, subclusters[i].points, radius);
    if (free.empty()) continue;
    const Footprint vis = visible_footprint(cam, subclusters[i].points, buffers[j], radius, tolerance);
    const double score = visibility_score(free, vis);
    const double oracle = synth::raycast_visibility_oracle(cam, subclusters[i].points, ds.env_cloud,
                                                           radius, supersample, tolerance);
    worst = std::max(worst, std::abs(score - oracle));
    std::printf("%zu\t%zu\t%.4f\t%.4f\t%.4f\n", j, i, score, oracle, score - oracle);
    ++done;
  }
  std::printf("max_abs_diff %.4f over %d samples\n", worst, done);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view instance segmentation and counting"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment and count instances");
  segment->add_option("--crop-cloud", seg.crop, "Crop point cloud (PLY)")->required();
  segment->add_option("--env-cloud", seg.env, "Environment point cloud (PLY)")->required();
  segment->add_option("--cameras", seg.cameras, "Camera file (JSON)")->required();
  segment->add_option("--masks", seg.masks, "Directory of mask_%05d.png")->required();
  segment->add_option("--out", seg.out, "Output directory")->required();
  segment->add_option("--config", seg.config, "Pipeline config (JSON)");
  segment->add_option("--k", seg.k, "Subclusters per supercluster");
  segment->add_option("--eps", seg.eps, "DBSCAN radius in meters");
  segment->add_option("--min-points", seg.min_points, "DBSCAN core threshold");
  segment->add_option("--seed", seg.seed, "Random seed");
  segment->add_option("--variant", seg.variant,
                      "baseline | visibility | mask | reliability-threshold | full-lpa");
  segment->add_option("--workers", seg.workers, "Worker threads");
  segment->add_flag("--whole-cloud", seg.whole_cloud, "Skip DBSCAN; one supercluster");
  segment->add_flag("--dump", seg.dump, "Write score tables and affinity edge lists");

  std::string synth_spec, synth_out;
  int synth_workers = 1;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--spec", synth_spec, "Scene spec (JSON); defaults when omitted");
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();
  synth_cmd->add_option("--workers", synth_workers, "Worker threads");

  std::string corrupt_in, corrupt_spec, corrupt_out;
  auto* corrupt = app.add_subcommand("corrupt", "Corrupt a dataset's masks");
  corrupt->add_option("--in", corrupt_in, "Input dataset directory")->required();
  corrupt->add_option("--spec", corrupt_spec, "Corruption spec (JSON)")->required();
  corrupt->add_option("--out", corrupt_out, "Output dataset directory")->required();

  std::vector<std::string> eval_pred, eval_truth;
  auto* eval = app.add_subcommand("eval", "RMSE and MAPE of predicted counts");
  eval->add_option("--pred", eval_pred, "report.json files")->required();
  eval->add_option("--truth", eval_truth, "truth.json files, same order")->required();

  std::string oracle_in;
  int oracle_samples = 50;
  int oracle_supersample = 4;
  std::uint64_t oracle_seed = 42;
  int oracle_k = kDefaultK;
  auto* oracle = app.add_subcommand("oracle-vis", "Cross-check visibility against ray casting");
  oracle->add_option("--in", oracle_in, "Dataset directory")->required();
  oracle->add_option("--samples", oracle_samples, "Number of (view, subcluster) samples");
  oracle->add_option("--supersample", oracle_supersample, "Rays per pixel side");
  oracle->add_option("--seed", oracle_seed, "Sampling seed");
  oracle->add_option("--k", oracle_k, "Subclusters per supercluster");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*segment) return run_segment(seg);
    if (*synth_cmd) return run_synth(synth_spec, synth_out, synth_workers);
    if (*corrupt) return run_corrupt(corrupt_in, corrupt_spec, corrupt_out);
    if (*eval) return run_eval(eval_pred, eval_truth);
    if (*oracle) return run_oracle(oracle_in, oracle_samples, oracle_supersample, oracle_seed, oracle_k);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
