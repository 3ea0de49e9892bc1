// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "falqon/overhead_model.hpp"
#include "falqon/train.hpp"
#include "falqon_cli/run_config.hpp"

namespace falqon::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNumericalError = 2;

/// Reports of the three compare arms, all trained from one seed.
struct Comparison {
    RunReport melded;
    RunReport explicit_lora;
    RunReport oracle;  // full-precision explicit LoRA with A = A_hat frozen
};

/// FP8 configs (variant melded or explicit_fp8) compare melded against
/// explicit FP8 LoRA; full-precision configs compare melded_full against
/// explicit_full. Arms run on at most `threads` worker threads.
Comparison run_comparison(const RunConfig& config, unsigned threads);

/// Three sections (# losses, # counters, # modeled_times) in one CSV.
std::string comparison_csv(const Comparison& cmp, const CostParams& params);

/// Worker cap from FALQON_THREADS (unset: hardware concurrency). Throws
/// ConfigError on a value that is not a positive integer.
unsigned worker_threads();

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_compare(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_fp8_table(std::string_view format, std::ostream& out, std::ostream& err);
int cmd_svd_check(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed, std::ostream& out,
                  std::ostream& err);
int cmd_overhead(const std::optional<std::filesystem::path>& params_path, const LayerDims& dims, std::ostream& out,
                 std::ostream& err);

/// Parses argv with CLI11 and dispatches. Usage errors return kExitConfigError.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace falqon::cli
