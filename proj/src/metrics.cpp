#include "fsenet/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fsenet/filters.hpp"
#include "fsenet/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace fsenet {

namespace {

// Separable Gaussian filtering in double, valid output region only.
std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w, int win,
                                const std::vector<double>& k1d) {
  const int oh = h - win + 1, ow = w - win + 1;
  std::vector<double> rowpass(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int t = 0; t < win; ++t) s += k1d[static_cast<size_t>(t)] * img[static_cast<size_t>(y) * w + x + t];
      rowpass[static_cast<size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int t = 0; t < win; ++t) s += k1d[static_cast<size_t>(t)] * rowpass[static_cast<size_t>(y + t) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = s;
    }
  return out;
}

std::vector<double> gaussian_1d(int win, double sigma) {
  std::vector<double> k(static_cast<size_t>(win));
  double c = (win - 1) / 2.0, sum = 0;
  for (int i = 0; i < win; ++i) {
    k[static_cast<size_t>(i)] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

namespace metric_detail {

double ssim_impl(const double* pa, const double* pb, int h, int w, int c) {
  const int win = 11;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  if (std::min(h, w) < win) throw ShapeError("ssim: image smaller than the 11px window");
  std::vector<double> k1d = gaussian_1d(win, 1.5);

  double total = 0;
  int64_t count = 0;
  std::vector<double> a(static_cast<size_t>(h) * w), b(static_cast<size_t>(h) * w);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double va = pa[(static_cast<size_t>(y) * w + x) * c + ch];
        double vb = pb[(static_cast<size_t>(y) * w + x) * c + ch];
        a[static_cast<size_t>(y) * w + x] = va;
        b[static_cast<size_t>(y) * w + x] = vb;
        aa[static_cast<size_t>(y) * w + x] = va * va;
        bb[static_cast<size_t>(y) * w + x] = vb * vb;
        ab[static_cast<size_t>(y) * w + x] = va * vb;
      }
    auto mu_a = gauss_valid(a, h, w, win, k1d);
    auto mu_b = gauss_valid(b, h, w, win, k1d);
    auto m_aa = gauss_valid(aa, h, w, win, k1d);
    auto m_bb = gauss_valid(bb, h, w, win, k1d);
    auto m_ab = gauss_valid(ab, h, w, win, k1d);
    for (size_t i = 0; i < mu_a.size(); ++i) {
      double va = m_aa[i] - mu_a[i] * mu_a[i];
      double vb = m_bb[i] - mu_b[i] * mu_b[i];
      double cov = m_ab[i] - mu_a[i] * mu_b[i];
      double num = (2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2);
      double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace metric_detail

MetricRow aggregate_rows(const std::vector<MetricRow>& rows) {
  MetricRow mean;
  mean.name = "mean";
  if (rows.empty()) return mean;
  for (const auto& r : rows) {
    mean.psnr += r.psnr;
    mean.ssim += r.ssim;
    mean.rmse += r.rmse;
    mean.seconds += r.seconds;
  }
  double n = static_cast<double>(rows.size());
  mean.psnr /= n;
  mean.ssim /= n;
  mean.rmse /= n;
  mean.seconds /= n;
  return mean;
}

namespace {

std::map<std::string, fs::path> stems_of(const std::string& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out[e.path().stem().string()] = e.path();
  }
  return out;
}

}  // namespace

MetricReport evaluate_dir(const std::string& pred_dir, const std::string& target_dir,
                          const std::map<std::string, double>* seconds) {
  auto preds = stems_of(pred_dir);
  auto targets = stems_of(target_dir);
  MetricReport report;
  for (const auto& [stem, ppath] : preds) {
    auto it = targets.find(stem);
    if (it == targets.end()) {
      report.warnings.push_back("no target for " + stem + ", row skipped");
      continue;
    }
    auto t0 = std::chrono::steady_clock::now();
    Image p = load_image(ppath.string());
    Image t = load_image(it->second.string());
    if (!p.same_shape(t)) {
      report.warnings.push_back("shape mismatch for " + stem + ", row skipped");
      continue;
    }
    MetricRow row;
    row.name = stem;
    row.psnr = psnr(p, t);
    row.ssim = ssim(p, t);
    row.rmse = rmse(p, t);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds) {
      auto s = seconds->find(stem);
      if (s != seconds->end()) row.seconds = s->second;
    }
    report.rows.push_back(row);
  }
  for (const auto& [stem, tpath] : targets)
    if (!preds.count(stem)) report.warnings.push_back("no prediction for " + stem + ", row skipped");
  report.mean = aggregate_rows(report.rows);
  return report;
}

namespace {

nlohmann::json num_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

nlohmann::json row_json(const MetricRow& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["psnr"] = num_or_inf(r.psnr);
  j["ssim"] = r.ssim;
  j["rmse"] = r.rmse;
  j["seconds"] = r.seconds;
  return j;
}

}  // namespace

std::string report_to_json(const MetricReport& r, const std::map<std::string, std::string>& provenance) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) j["rows"].push_back(row_json(row));
  j["mean"] = row_json(r.mean);
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  for (const auto& [k, v] : provenance) j[k] = v;
  return j.dump(2);
}

void write_report_json(const MetricReport& r, const std::string& path,
                       const std::map<std::string, std::string>& provenance) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << report_to_json(r, provenance) << "\n";
}

std::string format_table(const MetricReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-24s %10s %8s %8s %9s\n", "name", "psnr", "ssim", "rmse", "sec");
  out += buf;
  auto line = [&](const MetricRow& row) {
    std::snprintf(buf, sizeof(buf), "%-24s %10.4f %8.4f %8.4f %9.3f\n", row.name.c_str(), row.psnr,
                  row.ssim, row.rmse, row.seconds);
    out += buf;
  };
  for (const auto& row : r.rows) line(row);
  std::snprintf(buf, sizeof(buf), "%-24s %10s %8s %8s %9s\n", "----", "----", "----", "----", "----");
  out += buf;
  line(r.mean);
  return out;
}

}  // namespace fsenet
