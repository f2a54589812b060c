#pragma once

#include <map>
#include <string>
#include <vector>

#include "fsenet/config.hpp"
#include "fsenet/nn/module.hpp"

namespace fsenet {

/// Flat binary tensor archive: an 8-byte little-endian manifest length, a
/// JSON manifest (config, extras, tensor table with byte offsets), then
/// little-endian float32 blobs. Round trips are byte-exact.
struct Archive {
  FSENetConfig config;
  std::map<std::string, std::string> extras;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

void save_archive(const std::string& path, const Archive& a);
Archive load_archive(const std::string& path);

/// Convenience for plain model checkpoints.
void save_checkpoint(const std::string& path, const FSENetConfig& cfg,
                     const nn::ParamStore<float>& store,
                     const std::map<std::string, std::string>& extras = {});

/// Copies archive tensors into a store built from the archive's config.
/// Shape mismatches raise an error naming the first offending tensor.
void load_into_store(const Archive& a, nn::ParamStore<float>& store);

}  // namespace fsenet
