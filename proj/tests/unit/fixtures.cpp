// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <unistd.h>

namespace gnv::test {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gnv_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const fs::path& tiny_dataset_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch_dir("dataset");
    DatasetSpec spec;
    spec.frames = 3;
    spec.cameras = 2;
    spec.width = 32;
    spec.height = 32;
    generate_dataset(make_subjects(3, 11), spec, d);
    return d;
  }();
  return dir;
}

nlohmann::json tiny_config_json(const fs::path& out) {
  return {{"dataset", tiny_dataset_dir().string()},
          {"out", out.string()},
          {"seed", 3},
          {"iterations", {{"pretrain", 6}, {"scratch", 6}, {"finetune", 6}}},
          {"render", {{"n_samples", 8}, {"patch_count", 1}, {"patch_size", 8}}},
          {"eval", {{"every", 3}, {"images", 1}}},
          {"loss", {{"mse_only_iters", 2}}},
          {"checkpoint_every", 2},
          {"model",
           {{"preset", "desk"},
            {"voxel_dims", {10, 12, 6}},
            {"voxel_channels", 2},
            {"interp_scales", {1, 2}},
            {"radiance_width", 16},
            {"radiance_depth", 2}}}};
}

RunConfig tiny_run_config(const fs::path& out) { return run_config_from_json(tiny_config_json(out)); }

}  // namespace gnv::test
