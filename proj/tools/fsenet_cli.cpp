// fsenet command-line entry point. Exit codes: 0 ok, 1 usage, 2 data error,
// 3 runtime error.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fsenet/checkpoint.hpp"
#include "fsenet/data.hpp"
#include "fsenet/image_io.hpp"
#include "fsenet/metrics.hpp"
#include "fsenet/model.hpp"
#include "fsenet/train.hpp"

namespace fs = std::filesystem;
using namespace fsenet;

namespace {

FSENetConfig config_from(const std::string& path) {
  if (path.empty()) {
    FSENetConfig cfg;
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
  }
  return load_config_file(path);
}

uint64_t file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<size_t>(f.gcount()), h);
  }
  return h;
}

int cmd_train(const std::string& config_path, const std::string& data_root, const std::string& out_dir,
              const std::string& resume) {
  FSENetConfig cfg = config_from(config_path);
  DatasetIndex train_idx = scan_dataset(data_root, "train");
  for (const auto& w : train_idx.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  DatasetIndex val_idx;
  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.resume = resume;
  try {
    val_idx = scan_dataset(data_root, "test");
    if (!val_idx.records.empty()) opts.val_index = &val_idx;
  } catch (const DataError&) {
    // no test split; train without validation
  }
  TrainResult r = train_model(cfg, train_idx, opts);
  std::printf("final loss %.6f; last checkpoint %s\n", r.final_loss, r.last_checkpoint.c_str());
  if (!r.best_checkpoint.empty())
    std::printf("best val rmse %.4f; best checkpoint %s\n", r.best_val_rmse, r.best_checkpoint.c_str());
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& input, const std::string& out, int max_side) {
  run_inference(ckpt, input, out, max_side);
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_root, const std::string& split,
             const std::string& out_json, const std::string& keep_dir, int max_side, bool table) {
  DatasetIndex idx = scan_dataset(data_root, split);
  if (idx.records.empty()) throw DataError("empty split: " + split);
  bool temp_preds = keep_dir.empty();
  std::string pred_dir =
      temp_preds ? (fs::temp_directory_path() / ("fsenet_eval_pred_" + std::to_string(::getpid()))).string()
                 : keep_dir;
  if (temp_preds) fs::remove_all(pred_dir);
  fs::create_directories(pred_dir);

  std::string input_dir = (fs::path(data_root) / split / "input").string();
  auto times = run_inference(ckpt, input_dir, pred_dir, max_side, true);
  std::map<std::string, double> seconds(times.begin(), times.end());

  std::string target_dir = (fs::path(data_root) / split / "target").string();
  MetricReport report = evaluate_dir(pred_dir, target_dir, &seconds);

  Archive a = load_archive(ckpt);
  nn::ParamStore<float> store;
  Rng rng(a.config.seed);
  FSENet<float> model(a.config, store, rng);
  std::map<std::string, std::string> provenance;
  provenance["checkpoint_hash"] = hex64(file_hash(ckpt));
  provenance["config_hash"] = hex64(fnv1a(config_to_json(a.config).data(), config_to_json(a.config).size()));
  provenance["params_millions"] = std::to_string(store.parameter_count() / 1e6);
  if (!out_json.empty()) write_report_json(report, out_json, provenance);
  if (table) std::printf("%s", format_table(report).c_str());
  std::printf("PSNR %.2f  SSIM %.4f  RMSE %.2f  time(s) %.2f  Param(M) %.2f\n", report.mean.psnr,
              report.mean.ssim, report.mean.rmse, report.mean.seconds,
              store.parameter_count() / 1e6);
  if (temp_preds) fs::remove_all(pred_dir);
  return 0;
}

int cmd_metrics(const std::string& pred, const std::string& target, const std::string& out, bool table) {
  MetricReport report = evaluate_dir(pred, target);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!out.empty()) write_report_json(report, out);
  if (table || out.empty()) std::printf("%s", format_table(report).c_str());
  return 0;
}

int cmd_decompose(const std::string& input, int depth, const std::string& out_dir) {
  Image img = load_image(input);
  auto [padded, pad] = pad_to_multiple(img, 1 << depth);
  LaplacianStack<float> stack = decompose(padded, depth);
  fs::create_directories(out_dir);
  for (int i = 0; i < stack.depth(); ++i) {
    // high bands stored 0.5-centered: value = 0.5 + band/2
    Image vis = stack.highs[static_cast<size_t>(i)];
    for (auto& v : vis.data_) v = 0.5f + v / 2.0f;
    save_image(clamp01(std::move(vis)), (fs::path(out_dir) / ("high_" + std::to_string(i) + ".png")).string());
  }
  save_image(clamp01(Image(stack.low)), (fs::path(out_dir) / "low.png").string());
  std::printf("wrote %d high bands + low to %s\n", stack.depth(), out_dir.c_str());
  return 0;
}

int cmd_synth(const std::string& image, const std::string& mask_path, double alpha,
              const std::string& out) {
  Image target = load_image(image);
  Image mask = load_image(mask_path);
  if (mask.channels() != 1) {
    Image m1({mask.height(), mask.width(), 1});
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x) m1.at(y, x, 0) = mask.at(y, x, 0);
    mask = std::move(m1);
  }
  for (auto& v : mask.data_) v = v > 0.5f ? 1.0f : 0.0f;
  save_image(synthesize_shadow(target, mask, alpha), out);
  return 0;
}

int cmd_extract_mask(const std::string& shadow, const std::string& target, double tau,
                     const std::string& out) {
  Image mask = extract_mask(load_image(shadow), load_image(target), tau);
  save_image(mask, out);  // 0/255 single channel
  return 0;
}

int cmd_stats(const std::string& data_root, const std::string& split, const std::string& out) {
  DatasetIndex idx = scan_dataset(data_root, split);
  for (const auto& w : idx.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  CorpusStats stats = corpus_stats(idx);
  std::string json = stats_to_json(stats);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw IoError("cannot write " + out);
    f << json << "\n";
  } else {
    std::printf("%s\n", json.c_str());
  }
  return 0;
}

int cmd_params(const std::string& config_path) {
  FSENetConfig cfg = config_from(config_path);
  nn::ParamStore<float> store;
  Rng rng(cfg.seed);
  FSENet<float> model(cfg, store, rng);
  std::printf("parameters: %lld (%.2fM)\n", static_cast<long long>(store.parameter_count()),
              store.parameter_count() / 1e6);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frequency-aware document shadow removal toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_root, out_dir = "runs/default", resume;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "key-value config file");
  train->add_option("--data", data_root, "dataset root (train/{input,target[,mask]})")->required();
  train->add_option("--out", out_dir, "output directory for checkpoints and logs");
  train->add_option("--resume", resume, "training-state archive to resume from");

  std::string ckpt, input, infer_out = "out";
  int max_side = 0;
  auto* infer = app.add_subcommand("infer", "run a checkpoint over images");
  infer->add_option("--ckpt", ckpt, "checkpoint file")->required();
  infer->add_option("--input", input, "image file or directory")->required();
  infer->add_option("--out", infer_out, "output directory");
  infer->add_option("--max-side", max_side, "pre-resize so the longer side fits");

  std::string eval_split = "test", eval_json, eval_keep;
  bool eval_table = false;
  auto* eval = app.add_subcommand("eval", "infer over a split and report metrics");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--data", data_root, "dataset root")->required();
  eval->add_option("--split", eval_split, "split name");
  eval->add_option("--out", eval_json, "report JSON path");
  eval->add_option("--keep-images", eval_keep, "keep predictions in this directory");
  eval->add_option("--max-side", max_side, "pre-resize before inference");
  eval->add_flag("--table", eval_table, "print the per-image table");

  std::string pred_dir, target_dir, metrics_json;
  bool metrics_table = false;
  auto* metrics = app.add_subcommand("metrics", "PSNR/SSIM/RMSE between two directories");
  metrics->add_option("--pred", pred_dir, "predictions directory")->required();
  metrics->add_option("--target", target_dir, "targets directory")->required();
  metrics->add_option("--out", metrics_json, "report JSON path");
  metrics->add_flag("--table", metrics_table, "print the per-image table");

  int depth = 2;
  std::string dec_out = "decomposed";
  auto* dec = app.add_subcommand("decompose", "dump Laplacian bands as PNGs");
  dec->add_option("--input", input, "image file")->required();
  dec->add_option("--depth", depth, "pyramid depth");
  dec->add_option("--out", dec_out, "output directory");

  std::string synth_image, synth_mask, synth_out = "synth.png";
  double alpha = 0.5;
  auto* synth = app.add_subcommand("synth", "alpha-composite a shadow into an image");
  synth->add_option("--image", synth_image, "shadow-free image")->required();
  synth->add_option("--mask", synth_mask, "binary mask image")->required();
  synth->add_option("--alpha", alpha, "darkening strength in [0,1]");
  synth->add_option("--out", synth_out, "output image");

  std::string em_shadow, em_target, em_out = "mask.png";
  double tau = 0.85;
  auto* em = app.add_subcommand("extract-mask", "threshold-based shadow mask recovery");
  em->add_option("--shadow", em_shadow, "shadow image")->required();
  em->add_option("--target", em_target, "shadow-free image")->required();
  em->add_option("--tau", tau, "luminance-ratio threshold");
  em->add_option("--out", em_out, "output mask PNG");

  std::string stats_split = "train", stats_out;
  auto* stats = app.add_subcommand("stats", "corpus shadow-area statistics");
  stats->add_option("--data", data_root, "dataset root")->required();
  stats->add_option("--split", stats_split, "split name");
  stats->add_option("--out", stats_out, "stats JSON path");

  auto* params = app.add_subcommand("params", "print the parameter count");
  params->add_option("--config", config_path, "key-value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) return cmd_train(config_path, data_root, out_dir, resume);
    if (*infer) return cmd_infer(ckpt, input, infer_out, max_side);
    if (*eval) return cmd_eval(ckpt, data_root, eval_split, eval_json, eval_keep, max_side, eval_table);
    if (*metrics) return cmd_metrics(pred_dir, target_dir, metrics_json, metrics_table);
    if (*dec) return cmd_decompose(input, depth, dec_out);
    if (*synth) return cmd_synth(synth_image, synth_mask, alpha, synth_out);
    if (*em) return cmd_extract_mask(em_shadow, em_target, tau, em_out);
    if (*stats) return cmd_stats(data_root, stats_split, stats_out);
    if (*params) return cmd_params(config_path);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
