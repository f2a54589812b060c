#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsenet/common.hpp"
#include "fsenet/tensor.hpp"

namespace fsenet {

/// One matched record of a `root/{split}/{input,target[,mask]}` layout.
struct SampleRecord {
  std::string name;  // filename stem shared across subdirectories
  std::string shadow_path;
  std::string target_path;
  std::string mask_path;  // empty when the split carries no masks
  bool has_mask() const { return !mask_path.empty(); }
};

struct DatasetIndex {
  std::string root;
  std::string split;
  std::vector<SampleRecord> records;
  std::vector<std::string> warnings;  // unmatched names, excluded records
  size_t size() const { return records.size(); }
};

/// Scans root/split/{input,target[,mask]}; records are matched by stem and
/// sorted by name. Records missing either image are excluded with a warning;
/// a missing mask directory is tolerated.
DatasetIndex scan_dataset(const std::string& root, const std::string& split);

/// Threshold-based mask recovery: the luminance ratio shadow/target drops
/// below tau inside shadows; morphological open+close (2.5 px radius disc)
/// removes speckle. Output is single-channel {0,1}.
Image extract_mask(const Image& shadow, const Image& target, double tau = 0.85);

/// Darkening alpha composite: out = target * (1 - alpha * mask).
Image synthesize_shadow(const Image& target, const Image& mask, double alpha);

struct CorpusStats {
  int64_t records = 0;
  bool coverage_available = false;
  double coverage_mean = 0;    // fraction of shadowed pixels
  double coverage_std = 0;     // population std
  std::vector<double> per_image_coverage;
  std::vector<std::pair<std::string, int64_t>> resolution_histogram;  // "WxH" -> count
};

/// Shadow-area statistics over the index. Masks are loaded when present,
/// otherwise recovered with extract_mask.
CorpusStats corpus_stats(const DatasetIndex& index, double tau = 0.85);

std::string stats_to_json(const CorpusStats& s);

struct BatchConfig {
  int batch_size = 4;
  int crop = 512;
  double synth_prob = 0.5;
  double alpha_min = 0.2;
  double alpha_max = 0.7;
  double mask_tau = 0.85;
};

struct Sample {
  Image input;
  Image target;
  int record_index = -1;
};

/// Draws one training batch: records uniformly at random, a shared random
/// crop window per triplet (resize-up first when the image is smaller than
/// the crop), random horizontal flip, and with probability synth_prob the
/// stored shadow input is replaced by a synthesized one. All randomness
/// flows through `rng`.
std::vector<Sample> training_batch(const DatasetIndex& index, const BatchConfig& cfg, Rng& rng);

}  // namespace fsenet
