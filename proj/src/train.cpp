#include "fsenet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fsenet/image_io.hpp"
#include "fsenet/metrics.hpp"

namespace fs = std::filesystem;

namespace fsenet {

AdamOptimizer::AdamOptimizer(nn::ParamStore<float>& store, double beta1, double beta2, double eps)
    : store_(&store), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (const auto& e : store.entries()) {
    m_.push_back(Tensor<float>::zeros(e.value.shape()));
    v_.push_back(Tensor<float>::zeros(e.value.shape()));
  }
}

double AdamOptimizer::step(double lr, double clip) {
  double norm_sq = 0;
  for (auto& e : store_->entries()) {
    if (e.grad.empty()) continue;
    for (int64_t i = 0; i < e.grad.numel(); ++i) {
      double g = e.grad.data()[i];
      norm_sq += g * g;
    }
  }
  double norm = std::sqrt(norm_sq);
  double gscale = (clip > 0 && norm > clip) ? clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t p = 0; p < store_->size(); ++p) {
    auto& e = store_->entry(static_cast<int>(p));
    if (e.grad.empty()) continue;
    Tensor<float>& m = m_[p];
    Tensor<float>& v = v_[p];
    for (int64_t i = 0; i < e.value.numel(); ++i) {
      double g = static_cast<double>(e.grad.data()[i]) * gscale;
      double mi = beta1_ * m.data()[i] + (1 - beta1_) * g;
      double vi = beta2_ * v.data()[i] + (1 - beta2_) * g * g;
      m.data()[i] = static_cast<float>(mi);
      v.data()[i] = static_cast<float>(vi);
      double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
      e.value.data()[i] = static_cast<float>(e.value.data()[i] - update);
    }
  }
  return norm;
}

std::vector<std::pair<std::string, Tensor<float>>> AdamOptimizer::state_tensors() const {
  std::vector<std::pair<std::string, Tensor<float>>> out;
  for (size_t p = 0; p < store_->size(); ++p) {
    const auto& name = store_->entry(static_cast<int>(p)).name;
    out.emplace_back("adam.m." + name, m_[p]);
    out.emplace_back("adam.v." + name, v_[p]);
  }
  return out;
}

void AdamOptimizer::load_state(const Archive& a) {
  for (size_t p = 0; p < store_->size(); ++p) {
    const auto& name = store_->entry(static_cast<int>(p)).name;
    const Tensor<float>* m = a.find("adam.m." + name);
    const Tensor<float>* v = a.find("adam.v." + name);
    if (!m || !v) throw FormatError("train state missing optimizer moments for " + name);
    m_[p] = *m;
    v_[p] = *v;
  }
  auto it = a.extras.find("adam_t");
  if (it == a.extras.end()) throw FormatError("train state missing adam_t");
  t_ = std::stoll(it->second);
}

double cosine_lr(double lr0, double lr_min, int step, int total_steps) {
  if (total_steps <= 1) return lr_min;
  double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  if (t > 1) t = 1;
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(3.141592653589793 * t));
}

namespace {

Image resize_max_side(const Image& img, int max_side) {
  int side = std::max(img.height(), img.width());
  if (max_side <= 0 || side <= max_side) return img;
  double s = static_cast<double>(max_side) / side;
  int nh = std::max(1, static_cast<int>(std::lround(img.height() * s)));
  int nw = std::max(1, static_cast<int>(std::lround(img.width() * s)));
  return resize_bilinear(img, nh, nw);
}

double validate_rmse(const FSENet<float>& model, nn::ParamStore<float>& store,
                     const DatasetIndex& val, int count, int max_side) {
  nn::NoGradGuard ng;
  double acc = 0;
  int n = 0;
  for (const auto& rec : val.records) {
    if (n >= count) break;
    Image in = resize_max_side(load_image(rec.shadow_path), max_side);
    Image target = resize_max_side(load_image(rec.target_path), max_side);
    if (!in.same_shape(target)) continue;
    Image out = model.infer(store, in);
    acc += rmse(out, target);
    ++n;
  }
  return n ? acc / n : -1;
}

}  // namespace

TrainResult train_model(const FSENetConfig& cfg, const DatasetIndex& index, const TrainOptions& opts) {
  cfg.validate();
  fs::create_directories(opts.out_dir);

  nn::ParamStore<float> store;
  Rng init_rng(cfg.seed);
  FSENet<float> model(cfg, store, init_rng);
  AdamOptimizer opt(store);
  Rng data_rng(cfg.seed + 1);
  int start_step = 0;
  double best_rmse = -1;

  if (!opts.resume.empty()) {
    Archive a = load_archive(opts.resume);
    load_into_store(a, store);
    opt.load_state(a);
    start_step = std::stoi(a.extras.at("step"));
    data_rng.set_state(a.extras.at("rng"));
    auto it = a.extras.find("best_rmse");
    if (it != a.extras.end()) best_rmse = std::stod(it->second);
  }

  BatchConfig bc;
  bc.batch_size = cfg.batch_size;
  bc.crop = cfg.crop;
  bc.synth_prob = cfg.synth_prob;
  bc.alpha_min = cfg.alpha_min;
  bc.alpha_max = cfg.alpha_max;

  TrainResult result;
  result.loss_csv = (fs::path(opts.out_dir) / "loss.csv").string();
  std::ofstream csv(result.loss_csv, start_step == 0 ? std::ios::trunc : std::ios::app);
  if (!csv) throw IoError("cannot write " + result.loss_csv);
  if (start_step == 0) csv << "step,loss,l1,ssim_term,lr,sec_step\n";

  auto save_state = [&](const std::string& path, int step) {
    Archive a;
    a.config = cfg;
    for (const auto& e : store.entries()) a.tensors.emplace_back(e.name, e.value);
    for (auto& [name, t] : opt.state_tensors()) a.tensors.emplace_back(name, std::move(t));
    a.extras["step"] = std::to_string(step);
    a.extras["adam_t"] = std::to_string(opt.step_count());
    a.extras["rng"] = data_rng.state();
    if (best_rmse >= 0) a.extras["best_rmse"] = std::to_string(best_rmse);
    save_archive(path, a);
  };

  int end_step = cfg.steps;
  if (opts.stop_after > 0) end_step = std::min(end_step, opts.stop_after);
  for (int step = start_step; step < end_step; ++step) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<Sample> batch = training_batch(index, bc, data_rng);

    store.zero_grad();
    double loss_acc = 0, l1_acc = 0, ssim_acc = 0;
    nn::PassContext<float> ctx(&store, true);
    for (const auto& sample : batch) {
      nn::Value<float> pred = model.forward(ctx, sample.input);
      nn::LossParts<float> parts = nn::total_loss(pred, sample.target, cfg.lambda_ssim,
                                                  cfg.smooth_l1_beta);
      // mean over the batch
      nn::Value<float> scaled = nn::scale(parts.total, 1.0 / batch.size());
      nn::backward(scaled);
      loss_acc += (parts.l1 + parts.ssim_term) / batch.size();
      l1_acc += parts.l1 / batch.size();
      ssim_acc += parts.ssim_term / batch.size();
    }
    ctx.harvest_grads();

    if (!std::isfinite(loss_acc)) {
      std::string indices;
      for (const auto& s : batch) indices += std::to_string(s.record_index) + " ";
      std::string diag = (fs::path(opts.out_dir) / "nan_batch.txt").string();
      std::ofstream d(diag);
      d << "step " << step << " records: " << indices << "\n";
      throw Error("NaN loss at step " + std::to_string(step) + "; offending record indices: " +
                  indices + "(dumped to " + diag + ")");
    }

    double lr = cosine_lr(cfg.lr, cfg.lr_min, step, cfg.steps);
    opt.step(lr, cfg.grad_clip);

    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[192];
    std::snprintf(line, sizeof(line), "%d,%.8g,%.8g,%.8g,%.8g,%.3f\n", step, loss_acc, l1_acc,
                  ssim_acc, lr, sec);
    csv << line;
    csv.flush();
    if (step == start_step) result.first_loss = loss_acc;
    result.final_loss = loss_acc;
    if (!opts.quiet && (step % 50 == 0 || step + 1 == end_step))
      std::fprintf(stderr, "step %d/%d loss %.6f lr %.2e (%.2fs)\n", step, cfg.steps, loss_acc, lr, sec);

    bool last = step + 1 == end_step;
    if (opts.val_index && ((step + 1) % cfg.val_interval == 0 || last)) {
      double v = validate_rmse(model, store, *opts.val_index, cfg.val_count, cfg.val_max_side);
      if (v >= 0 && (best_rmse < 0 || v < best_rmse)) {
        best_rmse = v;
        result.best_checkpoint = (fs::path(opts.out_dir) / "best.ckpt").string();
        save_checkpoint(result.best_checkpoint, cfg, store, {{"val_rmse", std::to_string(v)}});
      }
      if (!opts.quiet) std::fprintf(stderr, "step %d val rmse %.4f (best %.4f)\n", step, v, best_rmse);
    }
    if (last || (step + 1) % std::max(cfg.val_interval, 1) == 0)
      save_state((fs::path(opts.out_dir) / "last.ckpt").string(), step + 1);
  }
  result.best_val_rmse = best_rmse;
  result.last_checkpoint = (fs::path(opts.out_dir) / "last.ckpt").string();
  return result;
}

std::vector<std::pair<std::string, double>> run_inference(const std::string& ckpt_path,
                                                          const std::string& input_path,
                                                          const std::string& out_dir, int max_side,
                                                          bool quiet) {
  Archive a = load_archive(ckpt_path);
  nn::ParamStore<float> store;
  Rng rng(a.config.seed);
  FSENet<float> model(a.config, store, rng);
  load_into_store(a, store);

  std::vector<fs::path> files;
  if (fs::is_directory(input_path)) {
    for (const auto& e : fs::directory_iterator(input_path)) {
      if (!e.is_regular_file()) continue;
      std::string ext = e.path().extension().string();
      for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(input_path)) {
    files.push_back(input_path);
  } else {
    throw DataError("no such input: " + input_path);
  }
  if (files.empty()) throw DataError("no images under " + input_path);
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, double>> times;
  for (const auto& f : files) {
    auto t0 = std::chrono::steady_clock::now();
    Image in = resize_max_side(load_image(f.string()), max_side);
    Image out = model.infer(store, in);
    std::string out_path = (fs::path(out_dir) / f.filename()).string();
    save_image(out, out_path);
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    times.emplace_back(f.stem().string(), sec);
    if (!quiet) std::fprintf(stderr, "%s -> %s (%.2fs)\n", f.string().c_str(), out_path.c_str(), sec);
  }
  return times;
}

}  // namespace fsenet
