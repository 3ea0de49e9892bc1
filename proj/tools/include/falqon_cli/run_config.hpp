// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "falqon/overhead_model.hpp"
#include "falqon/train.hpp"

namespace falqon::cli {

/// Output locations. Empty means "not written" (the report then goes to
/// stdout). Relative paths resolve against the config file's directory.
struct OutputPaths {
    std::filesystem::path report;
    std::filesystem::path checkpoint;
    std::filesystem::path breakdown;
    std::filesystem::path comparison;
    std::filesystem::path resume_checkpoint;
};

struct RunConfig {
    TrainConfig train;
    CostParams cost;
    OutputPaths outputs;
};

/// INI text with sections [run], [optimizer], [data], [cost], [output].
/// Every key is optional; unknown sections or keys and malformed values
/// throw ConfigError. Relative output paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Parses a file holding only a [cost] section.
CostParams load_cost_params(const std::filesystem::path& path);

/// Round-trippable INI rendering of every field (used for documentation).
std::string render_run_config(const RunConfig& config);

}  // namespace falqon::cli
