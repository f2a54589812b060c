#pragma once

#include <string>
#include <vector>

#include "fsenet/common.hpp"

namespace fsenet {

/// Architecture and training hyperparameters. Everything is overridable via
/// the key-value config file and FSENET_<KEY> environment variables.
struct FSENetConfig {
  // architecture
  int depth = 2;                 // Laplacian pyramid depth D
  int base_channels = 32;        // low-frequency branch width C
  int dat_blocks = 3;            // DAT blocks per stage (and TAA fan-in N)
  int dat_heads = 4;             // attention heads per axis
  int unet_levels = 2;
  int dfe_per_level = 2;
  int trunk_channels = 16;       // high-frequency (contour/TRM) width
  int contour_blocks = 3;
  std::vector<int> trm_dilations = {1, 2, 4, 8};
  std::vector<int> spp_grids = {1, 2, 4, 8};
  int se_reduction = 4;
  bool deformable = true;
  bool share_trm = false;        // share one refiner across pyramid levels
  double alpha_init = 1.0;

  // objective
  double lambda_ssim = 0.4;
  double smooth_l1_beta = 1.0;

  // optimisation
  double lr = 2e-4;
  double lr_min = 1e-6;
  int batch_size = 4;
  int steps = 10000;
  int crop = 512;
  double synth_prob = 0.5;
  double alpha_min = 0.2;
  double alpha_max = 0.7;
  double grad_clip = 1.0;
  int val_interval = 500;
  int val_count = 4;
  int val_max_side = 512;
  uint64_t seed = 0;

  void validate() const;
  /// Padding factor the model needs: pyramid divisibility times what the
  /// UNet eats on the base.
  int pad_factor() const { return (1 << depth) * (1 << (unet_levels - 1)); }
};

/// Parses `key = value` lines ('#' comments); unknown keys are an error.
FSENetConfig load_config_file(const std::string& path);

/// Applies FSENET_<KEY> environment overrides in place.
void apply_env_overrides(FSENetConfig& cfg);

/// Applies one `key=value` assignment (shared by file/env parsing).
void apply_config_kv(FSENetConfig& cfg, const std::string& key, const std::string& value);

std::string config_to_json(const FSENetConfig& cfg);
FSENetConfig config_from_json(const std::string& json_text);

}  // namespace fsenet
