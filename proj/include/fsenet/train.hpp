#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsenet/checkpoint.hpp"
#include "fsenet/config.hpp"
#include "fsenet/data.hpp"
#include "fsenet/model.hpp"

namespace fsenet {

/// Adam with global gradient-norm clipping and cosine learning-rate decay.
class AdamOptimizer {
 public:
  AdamOptimizer(nn::ParamStore<float>& store, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  /// One update from the store's accumulated grads; returns the pre-clip
  /// global grad norm.
  double step(double lr, double clip);

  int64_t step_count() const { return t_; }
  std::vector<std::pair<std::string, Tensor<float>>> state_tensors() const;
  void load_state(const Archive& a);

 private:
  nn::ParamStore<float>* store_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<float>> m_, v_;
};

double cosine_lr(double lr0, double lr_min, int step, int total_steps);

struct TrainOptions {
  std::string out_dir;              // checkpoints + logs
  std::string resume;               // optional state archive to resume from
  const DatasetIndex* val_index = nullptr;
  int stop_after = 0;               // pause after this step (0 = run to cfg.steps);
                                    // the schedule still spans cfg.steps
  bool quiet = false;
};

struct TrainResult {
  double first_loss = 0;
  double final_loss = 0;
  double best_val_rmse = -1;
  std::string last_checkpoint;
  std::string best_checkpoint;
  std::string loss_csv;
};

/// Runs the optimization loop described by cfg over the index. Writes
/// loss.csv, last.ckpt and (when validating) best.ckpt under out_dir.
/// Deterministic for a fixed seed; NaN losses abort with the offending
/// batch's record indices.
TrainResult train_model(const FSENetConfig& cfg, const DatasetIndex& index, const TrainOptions& opts);

/// Loads a checkpoint and runs full-resolution inference over one file or a
/// directory. Images larger than max_side (when > 0) are pre-resized so the
/// longer side matches. Returns per-stem wall-clock seconds.
std::vector<std::pair<std::string, double>> run_inference(const std::string& ckpt_path,
                                                          const std::string& input_path,
                                                          const std::string& out_dir,
                                                          int max_side = 0, bool quiet = false);

}  // namespace fsenet
