#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtl/core/config.hpp"
#include "mtl/core/io.hpp"
#include "mtl/core/lcz.hpp"
#include "mtl/data/dataset.hpp"
#include "mtl/data/synth.hpp"
#include "mtl/infer/infer.hpp"
#include "mtl/metrics/metrics.hpp"
#include "mtl/model/model.hpp"
#include "mtl/train/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

int effective_threads() {
  // Single-process implementation; MTL_THREADS is validated and clamped.
  const char* env = std::getenv("MTL_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw mtl::ConfigError("MTL_THREADS must be a positive integer");
  return 1;
}

void emit(bool json_mode, const json& j, const std::string& human) {
  if (json_mode)
    std::cout << j.dump(2) << std::endl;
  else
    std::cout << human << std::endl;
}

std::string scene_stub(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03d", i);
  return buf;
}

int run_synth(std::uint64_t seed, int scenes, int size, double urban_fraction,
              const std::string& out_dir, bool json_mode) {
  if (scenes < 1) throw mtl::ConfigError("--scenes must be >= 1");
  mtl::data::SynthParams params;
  params.height = size;
  params.width = size;
  params.urban_fraction = urban_fraction;
  fs::create_directories(out_dir);
  mtl::data::DatasetManifest manifest;
  for (int i = 0; i < scenes; ++i) {
    mtl::data::SceneBundle b = mtl::data::generate_scene(seed + static_cast<std::uint64_t>(i), params);
    const std::string stub = scene_stub(i);
    mtl::write_tensor((fs::path(out_dir) / (stub + "_image.mtlt")).string(), b.image);
    mtl::write_tensor((fs::path(out_dir) / (stub + "_hse.mtlt")).string(), b.hse_ref);
    mtl::write_labels((fs::path(out_dir) / (stub + "_lcz.mtlt")).string(), b.lcz_ref);
    mtl::data::ManifestEntry e;
    e.image_path = stub + "_image.mtlt";
    e.hse_path = stub + "_hse.mtlt";
    e.lcz_path = stub + "_lcz.mtlt";
    e.split = (scenes > 1 && (i % 5 == 4 || i == scenes - 1)) ? mtl::data::Split::Val
                                                              : mtl::data::Split::Train;
    manifest.entries.push_back(e);
  }
  mtl::data::save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  emit(json_mode,
       json{{"command", "synth"}, {"scenes", scenes}, {"size", size},
            {"out", out_dir}, {"manifest", "manifest.json"}},
       "wrote " + std::to_string(scenes) + " scene(s) and manifest to " + out_dir);
  return kExitOk;
}

int run_train(const std::string& manifest_path, const std::string& out_dir, int epochs,
              int batch_size, double lr, int patience, const std::string& weighting,
              const std::string& p2f, const std::string& cbam, const std::string& task,
              int patch, int features, std::uint64_t seed, bool json_mode) {
  auto on_off = [](const std::string& flag, const std::string& v) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw mtl::ConfigError("--" + flag + " must be 'on' or 'off'");
  };
  mtl::data::DatasetManifest manifest = mtl::data::load_manifest(manifest_path);
  const std::string base_dir = fs::path(manifest_path).parent_path().string();
  auto train_set = mtl::data::load_split_patches(manifest, mtl::data::Split::Train, base_dir, patch);
  auto val_set = mtl::data::load_split_patches(manifest, mtl::data::Split::Val, base_dir, patch);
  if (train_set.empty()) throw mtl::EmptySplitError("manifest yields no train patches");
  if (val_set.empty()) throw mtl::EmptySplitError("manifest yields no val patches");

  mtl::ModelConfig mc;
  mc.bands = train_set.front().image.dim(0);
  mc.patch_h = patch;
  mc.patch_w = patch;
  mc.base_features = features;
  mc.p2f_enabled = on_off("p2f", p2f);
  mc.cbam_enabled = on_off("cbam", cbam);
  mc.task = mtl::task_mode_from_name(task);
  mtl::validate_config(mc);

  mtl::train::TrainConfig tc;
  tc.batch_size = batch_size;
  tc.lr0 = lr;
  tc.patience = patience;
  tc.max_epochs = epochs;
  tc.seed = seed;
  if (weighting == "learned")
    tc.weighting = mtl::train::WeightingMode::Learned;
  else if (weighting == "fixed")
    tc.weighting = mtl::train::WeightingMode::Fixed1to1;
  else
    throw mtl::ConfigError("--weighting must be 'learned' or 'fixed'");

  mtl::MtlModel model(mc, seed);
  mtl::train::FitResult r = mtl::train::fit(model, train_set, val_set, tc, out_dir);
  emit(json_mode,
       json{{"command", "train"},
            {"train_patches", train_set.size()},
            {"val_patches", val_set.size()},
            {"epochs_run", r.stopped_epoch},
            {"best_epoch", r.best_epoch},
            {"best_val_loss", r.best_val_loss},
            {"checkpoint", (fs::path(out_dir) / "checkpoint").string()}},
       "trained " + std::to_string(r.stopped_epoch) + " epoch(s); best epoch " +
           std::to_string(r.best_epoch) + " (val loss " + std::to_string(r.best_val_loss) +
           "); checkpoint in " + (fs::path(out_dir) / "checkpoint").string());
  return kExitOk;
}

int run_predict(const std::string& checkpoint, const std::string& scene_path,
                const std::string& out_dir, int window, int overlap, bool json_mode) {
  int epoch = 0;
  mtl::ModelConfig mc = mtl::nn::ParameterStore::read_checkpoint_config(checkpoint, &epoch);
  mtl::MtlModel model(mc, 0);
  model.params().load_values(checkpoint);
  mtl::Tensor scene = mtl::data::normalize(mtl::read_tensor(scene_path));
  if (scene.dim(0) != mc.bands)
    throw mtl::ShapeError("scene band count does not match checkpoint");
  mtl::infer::ScenePrediction pred =
      mtl::infer::sliding_window_predict(model, scene, window, overlap);
  mtl::LabelGrid lcz_map;
  if (!pred.lcz_probs.empty()) lcz_map = mtl::infer::aggregate_lcz(pred.lcz_probs);
  mtl::infer::render_maps(pred.hse, lcz_map, out_dir);
  json j{{"command", "predict"}, {"out", out_dir}, {"checkpoint_epoch", epoch}};
  std::string human = "prediction maps written to " + out_dir;
  if (!pred.hse.empty())
    j["hse_shape"] = {pred.hse.dim(0), pred.hse.dim(1)};
  if (!lcz_map.empty())
    j["lcz_shape"] = {lcz_map.dim(0), lcz_map.dim(1)};
  emit(json_mode, j, human);
  return kExitOk;
}

// Majority non-IGNORE label per block; ties toward the lowest index; IGNORE
// when the block holds no valid labels. Partial edge blocks are dropped.
mtl::LabelGrid aggregate_reference_labels(const mtl::LabelGrid& labels, int block) {
  const int H = labels.dim(0), W = labels.dim(1);
  const int nb_y = H / block, nb_x = W / block;
  mtl::LabelGrid out({nb_y, nb_x});
  std::vector<int> votes(mtl::kNumLczClasses);
  for (int by = 0; by < nb_y; ++by)
    for (int bx = 0; bx < nb_x; ++bx) {
      std::fill(votes.begin(), votes.end(), 0);
      for (int i = 0; i < block; ++i)
        for (int j = 0; j < block; ++j) {
          std::uint8_t c = labels[static_cast<std::size_t>(by * block + i) * W + bx * block + j];
          if (c < mtl::kNumLczClasses) ++votes[c];
        }
      int best = -1;
      for (int c = 0; c < mtl::kNumLczClasses; ++c)
        if (votes[c] > 0 && (best < 0 || votes[c] > votes[best])) best = c;
      out[static_cast<std::size_t>(by) * nb_x + bx] =
          best < 0 ? mtl::kIgnoreLabel : static_cast<std::uint8_t>(best);
    }
  return out;
}

int run_evaluate(const std::string& pred_dir, const std::string& ref_dir,
                 const std::string& penalty_csv, const std::string& report_path,
                 bool json_mode) {
  mtl::Tensor pred_hse = mtl::read_tensor((fs::path(pred_dir) / "hse.mtlt").string());
  mtl::LabelGrid pred_lcz = mtl::read_labels((fs::path(pred_dir) / "lcz.mtlt").string());
  mtl::Tensor ref_hse = mtl::read_tensor((fs::path(ref_dir) / "hse.mtlt").string());
  mtl::LabelGrid ref_lcz10 = mtl::read_labels((fs::path(ref_dir) / "lcz.mtlt").string());
  mtl::LabelGrid ref_lcz = aggregate_reference_labels(ref_lcz10, 10);
  if (ref_lcz.dims() != pred_lcz.dims())
    throw mtl::ShapeError("aggregated reference and predicted LCZ maps differ in shape");

  mtl::metrics::PenaltyMatrix penalty =
      penalty_csv.empty() ? mtl::metrics::default_lcz_penalty()
                          : mtl::metrics::load_penalty_csv(penalty_csv, mtl::kNumLczClasses);

  mtl::metrics::ConfusionMatrix cm(mtl::kNumLczClasses);
  cm.accumulate({ref_lcz.data(), ref_lcz.numel()}, {pred_lcz.data(), pred_lcz.numel()});

  mtl::metrics::EvalReport r;
  r.oa = mtl::metrics::oa(cm);
  r.kappa = mtl::metrics::kappa(cm);
  r.aa = mtl::metrics::aa(cm);
  r.wa = mtl::metrics::weighted_accuracy(cm, penalty);
  for (const auto& cls : mtl::lcz_classes()) {
    mtl::metrics::EvalReport::PerClass pc;
    pc.index = cls.index;
    pc.name = cls.name;
    bool deg_r = false, deg_f = false;
    pc.recall = mtl::metrics::recall(cm, cls.index, &deg_r);
    pc.f_score = mtl::metrics::f_score(cm, cls.index, &deg_f);
    pc.degenerate = deg_r || deg_f;
    r.per_class.push_back(pc);
  }
  r.mae_percent = mtl::metrics::density_mae(pred_hse, ref_hse);

  mtl::LabelGrid pred_bin = mtl::metrics::binarize_density(pred_hse);
  mtl::LabelGrid ref_bin = mtl::metrics::binarize_density(ref_hse);
  mtl::metrics::ConfusionMatrix bcm(2);
  bcm.accumulate({ref_bin.data(), ref_bin.numel()}, {pred_bin.data(), pred_bin.numel()});
  r.hse_kappa = mtl::metrics::kappa(bcm);
  r.hse_aa = mtl::metrics::aa(bcm);
  r.hse_recall = mtl::metrics::recall(bcm, 1);
  r.hse_f = mtl::metrics::f_score(bcm, 1);

  const std::string report_json = mtl::metrics::report_to_json(r);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw mtl::IoError("cannot write report: " + report_path);
    out << report_json << "\n";
  }
  if (json_mode)
    std::cout << report_json << std::endl;
  else
    std::cout << "oa=" << r.oa << " kappa=" << r.kappa << " aa=" << r.aa << " wa=" << r.wa
              << " mae=" << r.mae_percent << "%"
              << (report_path.empty() ? "" : " (report: " + report_path + ")") << std::endl;
  return kExitOk;
}

int run_inspect(const std::string& path, bool json_mode) {
  if (fs::is_directory(path)) {
    int epoch = 0;
    mtl::ModelConfig mc = mtl::nn::ParameterStore::read_checkpoint_config(path, &epoch);
    mtl::MtlModel model(mc, 0);
    model.params().load_values(path);
    emit(json_mode,
         json{{"kind", "checkpoint"},
              {"epoch", epoch},
              {"parameters", model.params().parameter_count()},
              {"task", mtl::task_mode_name(mc.task)},
              {"bands", mc.bands},
              {"patch", {mc.patch_h, mc.patch_w}},
              {"base_features", mc.base_features},
              {"p2f", mc.p2f_enabled},
              {"cbam", mc.cbam_enabled}},
         "checkpoint: epoch " + std::to_string(epoch) + ", " +
             std::to_string(model.params().parameter_count()) + " parameters, task " +
             mtl::task_mode_name(mc.task));
    return kExitOk;
  }
  mtl::data::DatasetManifest m = mtl::data::load_manifest(path);
  std::size_t n_train = m.split(mtl::data::Split::Train).size();
  std::size_t n_val = m.split(mtl::data::Split::Val).size();
  std::size_t n_test = m.split(mtl::data::Split::Test).size();
  emit(json_mode,
       json{{"kind", "dataset"},
            {"scenes", m.entries.size()},
            {"train", n_train},
            {"val", n_val},
            {"test", n_test}},
       "dataset: " + std::to_string(m.entries.size()) + " scene(s) (" +
           std::to_string(n_train) + " train / " + std::to_string(n_val) + " val / " +
           std::to_string(n_test) + " test)");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task HSE regression and LCZ classification pipeline"};
  app.require_subcommand(1);
  bool json_mode = false;
  app.add_flag("--json", json_mode, "machine-readable JSON output on stdout");

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes and a manifest")->fallthrough();
  std::uint64_t synth_seed = 0;
  int synth_scenes = 1, synth_size = 260;
  double synth_uf = 0.5;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "base RNG seed");
  synth->add_option("--scenes", synth_scenes, "number of scenes");
  synth->add_option("--size", synth_size, "scene edge length in 10 m pixels");
  synth->add_option("--urban-fraction", synth_uf, "settlement density in [0,1]");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "fit the model on a dataset manifest")->fallthrough();
  std::string tr_manifest, tr_out = "run";
  int tr_epochs = 50, tr_batch = 8, tr_patience = 10, tr_patch = 128, tr_features = 16;
  double tr_lr = 0.002;
  std::uint64_t tr_seed = 0;
  std::string tr_weighting = "learned", tr_p2f = "off", tr_cbam = "on", tr_task = "mtl";
  train->add_option("--manifest", tr_manifest, "dataset manifest path")->required();
  train->add_option("--out", tr_out, "run output directory");
  train->add_option("--epochs", tr_epochs, "maximum epochs");
  train->add_option("--batch-size", tr_batch, "batch size");
  train->add_option("--lr", tr_lr, "initial learning rate");
  train->add_option("--patience", tr_patience, "early-stopping patience");
  train->add_option("--weighting", tr_weighting, "learned | fixed");
  train->add_option("--p2f", tr_p2f, "on | off");
  train->add_option("--cbam", tr_cbam, "on | off");
  train->add_option("--task", tr_task, "mtl | hse | lcz");
  train->add_option("--patch", tr_patch, "training patch size");
  train->add_option("--features", tr_features, "backbone base feature count");
  train->add_option("--seed", tr_seed, "RNG seed");

  auto* predict = app.add_subcommand("predict", "tiled whole-scene prediction")->fallthrough();
  std::string pr_checkpoint, pr_scene, pr_out;
  int pr_window = 128, pr_overlap = 32;
  predict->add_option("--checkpoint", pr_checkpoint, "checkpoint directory")->required();
  predict->add_option("--scene", pr_scene, "scene image (.mtlt)")->required();
  predict->add_option("--out", pr_out, "output directory")->required();
  predict->add_option("--window", pr_window, "inference window size");
  predict->add_option("--overlap", pr_overlap, "window overlap in pixels");

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against references")->fallthrough();
  std::string ev_pred, ev_ref, ev_penalty, ev_report;
  evaluate->add_option("--pred", ev_pred, "prediction directory (hse.mtlt, lcz.mtlt)")->required();
  evaluate->add_option("--ref", ev_ref, "reference directory (hse.mtlt, lcz.mtlt)")->required();
  evaluate->add_option("--penalty-matrix", ev_penalty, "17x17 penalty CSV");
  evaluate->add_option("--report", ev_report, "JSON report output path");

  auto* inspect = app.add_subcommand("inspect", "summarize a checkpoint or manifest")->fallthrough();
  std::string in_path;
  inspect->add_option("--path", in_path, "checkpoint directory or manifest path")->required();

  try {
    app.parse(argc, argv);
    effective_threads();
    if (*synth)
      return run_synth(synth_seed, synth_scenes, synth_size, synth_uf, synth_out, json_mode);
    if (*train)
      return run_train(tr_manifest, tr_out, tr_epochs, tr_batch, tr_lr, tr_patience,
                       tr_weighting, tr_p2f, tr_cbam, tr_task, tr_patch, tr_features,
                       tr_seed, json_mode);
    if (*predict)
      return run_predict(pr_checkpoint, pr_scene, pr_out, pr_window, pr_overlap, json_mode);
    if (*evaluate) return run_evaluate(ev_pred, ev_ref, ev_penalty, ev_report, json_mode);
    if (*inspect) return run_inspect(in_path, json_mode);
    std::cerr << "no subcommand" << std::endl;
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  } catch (const mtl::IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitIo;
  } catch (const mtl::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitValidation;
  }
}
