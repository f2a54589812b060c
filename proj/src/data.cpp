#include "fsenet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "fsenet/image.hpp"
#include "fsenet/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace fsenet {

namespace {

std::map<std::string, std::string> stems_in(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out[e.path().stem().string()] = e.path().string();
  }
  return out;
}

double luminance(const Image& img, int y, int x) {
  if (img.channels() == 1) return img.at(y, x, 0);
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

// Disc structuring element of radius 2.5 (the "5-pixel disc").
const std::vector<std::pair<int, int>>& disc_offsets() {
  static const std::vector<std::pair<int, int>> offs = [] {
    std::vector<std::pair<int, int>> v;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx)
        if (dy * dy + dx * dx <= 6) v.emplace_back(dy, dx);
    return v;
  }();
  return offs;
}

// Binary erosion/dilation with replicate borders.
Image morph(const Image& mask, bool erode) {
  const int h = mask.height(), w = mask.width();
  Image out({h, w, 1});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool acc = erode;
      for (const auto& [dy, dx] : disc_offsets()) {
        bool v = mask.at(clamp_index(y + dy, h), clamp_index(x + dx, w), 0) > 0.5f;
        if (erode)
          acc = acc && v;
        else
          acc = acc || v;
        if (erode != acc) break;
      }
      out.at(y, x, 0) = acc ? 1.0f : 0.0f;
    }
  return out;
}

Image open_close(const Image& mask) {
  Image m = morph(morph(mask, true), false);   // open
  return morph(morph(m, false), true);          // close
}

}  // namespace

DatasetIndex scan_dataset(const std::string& root, const std::string& split) {
  fs::path base = fs::path(root) / split;
  if (!fs::is_directory(base / "input") || !fs::is_directory(base / "target"))
    throw DataError("dataset split missing input/ or target/: " + base.string());

  auto inputs = stems_in(base / "input");
  auto targets = stems_in(base / "target");
  auto masks = stems_in(base / "mask");

  DatasetIndex index;
  index.root = root;
  index.split = split;
  for (const auto& [stem, in_path] : inputs) {
    auto t = targets.find(stem);
    if (t == targets.end()) {
      index.warnings.push_back("input without target: " + stem);
      continue;
    }
    SampleRecord rec;
    rec.name = stem;
    rec.shadow_path = in_path;
    rec.target_path = t->second;
    auto m = masks.find(stem);
    if (m != masks.end()) rec.mask_path = m->second;
    index.records.push_back(std::move(rec));
  }
  for (const auto& [stem, t_path] : targets)
    if (!inputs.count(stem)) index.warnings.push_back("target without input: " + stem);
  // std::map iteration already sorts records by name
  return index;
}

Image extract_mask(const Image& shadow, const Image& target, double tau) {
  if (shadow.height() != target.height() || shadow.width() != target.width())
    throw ShapeError("extract_mask: shape mismatch");
  const int h = shadow.height(), w = shadow.width();
  const double eps = 1e-6;
  Image mask({h, w, 1});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double r = luminance(shadow, y, x) / std::max(luminance(target, y, x), eps);
      mask.at(y, x, 0) = r < tau ? 1.0f : 0.0f;
    }
  return open_close(mask);
}

Image synthesize_shadow(const Image& target, const Image& mask, double alpha) {
  if (alpha < 0 || alpha > 1) throw Error("synthesize_shadow: alpha must be in [0,1]");
  if (mask.height() != target.height() || mask.width() != target.width() || mask.channels() != 1)
    throw ShapeError("synthesize_shadow: mask must be single-channel and match the target");
  Image out = target;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      float m = mask.at(y, x, 0);
      if (m == 0.0f) continue;
      float f = 1.0f - static_cast<float>(alpha) * m;
      for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) *= f;
    }
  return out;
}

CorpusStats corpus_stats(const DatasetIndex& index, double tau) {
  CorpusStats stats;
  stats.records = static_cast<int64_t>(index.records.size());
  std::map<std::string, int64_t> res_hist;
  for (const auto& rec : index.records) {
    Image target = load_image(rec.target_path);
    res_hist[std::to_string(target.width()) + "x" + std::to_string(target.height())]++;
    Image mask;
    if (rec.has_mask()) {
      mask = load_image(rec.mask_path);
    } else {
      Image shadow = load_image(rec.shadow_path);
      if (!shadow.same_shape(target)) continue;
      mask = extract_mask(shadow, target, tau);
    }
    int64_t on = 0;
    for (int64_t i = 0; i < mask.numel(); i += mask.channels())
      if (mask.data()[i] > 0.5f) ++on;
    stats.per_image_coverage.push_back(static_cast<double>(on) /
                                       (static_cast<double>(mask.height()) * mask.width()));
  }
  for (const auto& [k, v] : res_hist) stats.resolution_histogram.emplace_back(k, v);
  if (!stats.per_image_coverage.empty()) {
    stats.coverage_available = true;
    double sum = 0;
    for (double v : stats.per_image_coverage) sum += v;
    stats.coverage_mean = sum / static_cast<double>(stats.per_image_coverage.size());
    double var = 0;
    for (double v : stats.per_image_coverage) var += (v - stats.coverage_mean) * (v - stats.coverage_mean);
    stats.coverage_std = std::sqrt(var / static_cast<double>(stats.per_image_coverage.size()));
  }
  return stats;
}

std::string stats_to_json(const CorpusStats& s) {
  nlohmann::json j;
  j["records"] = s.records;
  if (s.coverage_available) {
    j["shadow_coverage"] = {{"mean", s.coverage_mean},
                            {"std", s.coverage_std},
                            {"per_image", s.per_image_coverage}};
  } else {
    j["shadow_coverage"] = "unavailable";
  }
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : s.resolution_histogram) hist[k] = v;
  j["resolution_histogram"] = hist;
  return j.dump(2);
}

namespace {

Image hflip(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, img.width() - 1 - x, c) = img.at(y, x, c);
  return out;
}

}  // namespace

std::vector<Sample> training_batch(const DatasetIndex& index, const BatchConfig& cfg, Rng& rng) {
  if (index.records.empty()) throw DataError("training_batch: empty dataset index");
  std::vector<Sample> batch;
  for (int b = 0; b < cfg.batch_size; ++b) {
    int ri = static_cast<int>(rng.below(static_cast<int64_t>(index.records.size())));
    const SampleRecord& rec = index.records[static_cast<size_t>(ri)];
    Image shadow = load_image(rec.shadow_path);
    Image target = load_image(rec.target_path);
    if (!shadow.same_shape(target))
      throw DataError("record " + rec.name + ": input/target shapes differ");
    Image mask;
    bool synth = rng.coin(cfg.synth_prob);
    if (synth || rec.has_mask()) {
      mask = rec.has_mask() ? load_image(rec.mask_path) : extract_mask(shadow, target, cfg.mask_tau);
      if (mask.channels() != 1) {
        Image m1({mask.height(), mask.width(), 1});
        for (int y = 0; y < mask.height(); ++y)
          for (int x = 0; x < mask.width(); ++x) m1.at(y, x, 0) = mask.at(y, x, 0);
        mask = std::move(m1);
      }
      for (auto& v : mask.data_) v = v > 0.5f ? 1.0f : 0.0f;
    }

    // Resize up (shared scale) when the image cannot host the crop window.
    if (shadow.height() < cfg.crop || shadow.width() < cfg.crop) {
      double scale = std::max(static_cast<double>(cfg.crop) / shadow.height(),
                              static_cast<double>(cfg.crop) / shadow.width());
      int nh = std::max(cfg.crop, static_cast<int>(std::ceil(shadow.height() * scale)));
      int nw = std::max(cfg.crop, static_cast<int>(std::ceil(shadow.width() * scale)));
      shadow = resize_bilinear(shadow, nh, nw);
      target = resize_bilinear(target, nh, nw);
      if (!mask.empty()) {
        mask = resize_bilinear(mask, nh, nw);
        for (auto& v : mask.data_) v = v > 0.5f ? 1.0f : 0.0f;
      }
    }

    int y0 = static_cast<int>(rng.below(shadow.height() - cfg.crop + 1));
    int x0 = static_cast<int>(rng.below(shadow.width() - cfg.crop + 1));
    bool flip = rng.coin(0.5);
    double alpha = rng.uniform(cfg.alpha_min, cfg.alpha_max);

    Sample s;
    s.record_index = ri;
    s.target = crop_region(target, y0, x0, cfg.crop, cfg.crop);
    if (synth && !mask.empty()) {
      Image mcrop = crop_region(mask, y0, x0, cfg.crop, cfg.crop);
      s.input = synthesize_shadow(s.target, mcrop, alpha);
    } else {
      s.input = crop_region(shadow, y0, x0, cfg.crop, cfg.crop);
    }
    if (flip) {
      s.input = hflip(s.input);
      s.target = hflip(s.target);
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace fsenet
