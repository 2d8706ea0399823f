// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Small on-disk dataset and run configuration shared by the slower tests.

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gnv/run_config.hpp"
#include "gnv/synthdata.hpp"

namespace gnv::test {

/// Fresh empty directory under the system temp dir, unique per process.
std::filesystem::path scratch_dir(const std::string& name);

/// Three subjects, three frames, two cameras at 32x32; generated once per process.
const std::filesystem::path& tiny_dataset_dir();

/// Config document for the tiny dataset with a small model.
nlohmann::json tiny_config_json(const std::filesystem::path& out);
RunConfig tiny_run_config(const std::filesystem::path& out);

}  // namespace gnv::test
