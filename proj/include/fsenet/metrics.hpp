#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fsenet/tensor.hpp"

namespace fsenet {

/// 10*log10(1/MSE) on [0,1] images; +inf for identical inputs.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("psnr: shape mismatch");
  double acc = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    double d = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
    acc += d * d;
  }
  double mse = acc / static_cast<double>(pred.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

/// RMSE on the 0-255 scale over all pixels and channels.
template <typename T>
double rmse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("rmse: shape mismatch");
  double acc = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    double d = 255.0 * (static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]));
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.numel()));
}

namespace metric_detail {
double ssim_impl(const double* a, const double* b, int h, int w, int c);
}

/// Gaussian-windowed SSIM (11x11, sigma 1.5, C1=0.01^2, C2=0.03^2, unit
/// range): per-channel over valid windows, then averaged.
template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("ssim: shape mismatch");
  Tensor<double> a = pred.template cast<double>();
  Tensor<double> b = target.template cast<double>();
  return metric_detail::ssim_impl(a.data(), b.data(), pred.height(), pred.width(), pred.channels());
}

struct MetricRow {
  std::string name;
  double psnr = 0, ssim = 0, rmse = 0, seconds = 0;
};

/// Per-image rows plus their arithmetic mean (per-image-then-mean; a mean
/// PSNR is NOT the PSNR of the mean RMSE).
struct MetricReport {
  std::vector<MetricRow> rows;
  MetricRow mean;
  std::vector<std::string> warnings;
};

MetricRow aggregate_rows(const std::vector<MetricRow>& rows);

/// Pairs files by stem across two directories and evaluates at native
/// resolution. Unmatched files become warnings. `seconds` optionally maps
/// stems to externally measured times (e.g. inference).
MetricReport evaluate_dir(const std::string& pred_dir, const std::string& target_dir,
                          const std::map<std::string, double>* seconds = nullptr);

std::string report_to_json(const MetricReport& r,
                           const std::map<std::string, std::string>& provenance = {});
void write_report_json(const MetricReport& r, const std::string& path,
                       const std::map<std::string, std::string>& provenance = {});
std::string format_table(const MetricReport& r);

}  // namespace fsenet
