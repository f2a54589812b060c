#include "fsenet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fsenet {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw ConfigError("empty list value: " + s);
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean value: " + s);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void FSENetConfig::validate() const {
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (base_channels < 1 || trunk_channels < 1) throw ConfigError("channel counts must be >= 1");
  if (base_channels % dat_heads != 0) throw ConfigError("dat_heads must divide base_channels");
  if (dat_blocks < 1 || unet_levels < 1 || dfe_per_level < 1 || contour_blocks < 1)
    throw ConfigError("block counts must be >= 1");
  if (lambda_ssim < 0) throw ConfigError("lambda_ssim must be >= 0");
  if (alpha_min < 0 || alpha_max > 1 || alpha_min > alpha_max)
    throw ConfigError("alpha_range must satisfy 0 <= min <= max <= 1");
  if (synth_prob < 0 || synth_prob > 1) throw ConfigError("synth_prob must be in [0,1]");
  if (trm_dilations.empty() || spp_grids.empty()) throw ConfigError("dilations/grids must be nonempty");
}

void apply_config_kv(FSENetConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "depth") cfg.depth = std::stoi(value);
  else if (key == "base_channels") cfg.base_channels = std::stoi(value);
  else if (key == "dat_blocks") cfg.dat_blocks = std::stoi(value);
  else if (key == "dat_heads") cfg.dat_heads = std::stoi(value);
  else if (key == "unet_levels") cfg.unet_levels = std::stoi(value);
  else if (key == "dfe_per_level") cfg.dfe_per_level = std::stoi(value);
  else if (key == "trunk_channels") cfg.trunk_channels = std::stoi(value);
  else if (key == "contour_blocks") cfg.contour_blocks = std::stoi(value);
  else if (key == "trm_dilations") cfg.trm_dilations = parse_int_list(value);
  else if (key == "spp_grids") cfg.spp_grids = parse_int_list(value);
  else if (key == "se_reduction") cfg.se_reduction = std::stoi(value);
  else if (key == "deformable") cfg.deformable = parse_bool(value);
  else if (key == "share_trm") cfg.share_trm = parse_bool(value);
  else if (key == "alpha_init") cfg.alpha_init = std::stod(value);
  else if (key == "lambda_ssim") cfg.lambda_ssim = std::stod(value);
  else if (key == "smooth_l1_beta") cfg.smooth_l1_beta = std::stod(value);
  else if (key == "lr") cfg.lr = std::stod(value);
  else if (key == "lr_min") cfg.lr_min = std::stod(value);
  else if (key == "batch_size") cfg.batch_size = std::stoi(value);
  else if (key == "steps") cfg.steps = std::stoi(value);
  else if (key == "crop") cfg.crop = std::stoi(value);
  else if (key == "synth_prob") cfg.synth_prob = std::stod(value);
  else if (key == "alpha_range") {
    size_t comma = value.find(',');
    if (comma == std::string::npos) throw ConfigError("alpha_range expects min,max");
    cfg.alpha_min = std::stod(value.substr(0, comma));
    cfg.alpha_max = std::stod(value.substr(comma + 1));
  }
  else if (key == "alpha_min") cfg.alpha_min = std::stod(value);
  else if (key == "alpha_max") cfg.alpha_max = std::stod(value);
  else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
  else if (key == "val_interval") cfg.val_interval = std::stoi(value);
  else if (key == "val_count") cfg.val_count = std::stoi(value);
  else if (key == "val_max_side") cfg.val_max_side = std::stoi(value);
  else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
  else throw ConfigError("unknown config key: " + key);
}

FSENetConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  FSENetConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    apply_config_kv(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

void apply_env_overrides(FSENetConfig& cfg) {
  static const char* keys[] = {
      "depth", "base_channels", "dat_blocks", "dat_heads", "unet_levels", "dfe_per_level",
      "trunk_channels", "contour_blocks", "trm_dilations", "spp_grids", "se_reduction",
      "deformable", "share_trm", "alpha_init", "lambda_ssim", "smooth_l1_beta", "lr", "lr_min",
      "batch_size", "steps", "crop", "synth_prob", "alpha_range", "alpha_min", "alpha_max",
      "grad_clip", "val_interval", "val_count", "val_max_side", "seed"};
  for (const char* key : keys) {
    std::string env = "FSENET_";
    for (const char* p = key; *p; ++p) env += static_cast<char>(std::toupper(*p));
    if (const char* v = std::getenv(env.c_str())) apply_config_kv(cfg, key, v);
  }
}

std::string config_to_json(const FSENetConfig& c) {
  nlohmann::json j;
  j["depth"] = c.depth;
  j["base_channels"] = c.base_channels;
  j["dat_blocks"] = c.dat_blocks;
  j["dat_heads"] = c.dat_heads;
  j["unet_levels"] = c.unet_levels;
  j["dfe_per_level"] = c.dfe_per_level;
  j["trunk_channels"] = c.trunk_channels;
  j["contour_blocks"] = c.contour_blocks;
  j["trm_dilations"] = c.trm_dilations;
  j["spp_grids"] = c.spp_grids;
  j["se_reduction"] = c.se_reduction;
  j["deformable"] = c.deformable;
  j["share_trm"] = c.share_trm;
  j["alpha_init"] = c.alpha_init;
  j["lambda_ssim"] = c.lambda_ssim;
  j["smooth_l1_beta"] = c.smooth_l1_beta;
  j["lr"] = c.lr;
  j["lr_min"] = c.lr_min;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["crop"] = c.crop;
  j["synth_prob"] = c.synth_prob;
  j["alpha_min"] = c.alpha_min;
  j["alpha_max"] = c.alpha_max;
  j["grad_clip"] = c.grad_clip;
  j["val_interval"] = c.val_interval;
  j["val_count"] = c.val_count;
  j["val_max_side"] = c.val_max_side;
  j["seed"] = c.seed;
  return j.dump();
}

FSENetConfig config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  FSENetConfig c;
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.dat_blocks = j.value("dat_blocks", c.dat_blocks);
  c.dat_heads = j.value("dat_heads", c.dat_heads);
  c.unet_levels = j.value("unet_levels", c.unet_levels);
  c.dfe_per_level = j.value("dfe_per_level", c.dfe_per_level);
  c.trunk_channels = j.value("trunk_channels", c.trunk_channels);
  c.contour_blocks = j.value("contour_blocks", c.contour_blocks);
  c.trm_dilations = j.value("trm_dilations", c.trm_dilations);
  c.spp_grids = j.value("spp_grids", c.spp_grids);
  c.se_reduction = j.value("se_reduction", c.se_reduction);
  c.deformable = j.value("deformable", c.deformable);
  c.share_trm = j.value("share_trm", c.share_trm);
  c.alpha_init = j.value("alpha_init", c.alpha_init);
  c.lambda_ssim = j.value("lambda_ssim", c.lambda_ssim);
  c.smooth_l1_beta = j.value("smooth_l1_beta", c.smooth_l1_beta);
  c.lr = j.value("lr", c.lr);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.crop = j.value("crop", c.crop);
  c.synth_prob = j.value("synth_prob", c.synth_prob);
  c.alpha_min = j.value("alpha_min", c.alpha_min);
  c.alpha_max = j.value("alpha_max", c.alpha_max);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.val_interval = j.value("val_interval", c.val_interval);
  c.val_count = j.value("val_count", c.val_count);
  c.val_max_side = j.value("val_max_side", c.val_max_side);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

}  // namespace fsenet
