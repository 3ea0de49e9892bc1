// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "falqon/dataset.hpp"
#include "falqon/model.hpp"
#include "falqon/op_counters.hpp"
#include "falqon/optimizer.hpp"

namespace falqon {

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t steps = 200;
    std::size_t batch = 16;
    std::size_t rank = 64;
    std::size_t top_k = 10;
    AdamWParams optimizer;
    BufferMode buffer_mode = BufferMode::accumulate;
    ModelVariant variant = ModelVariant::melded;
    LoraInit lora_init = LoraInit::melded_equivalent;
    std::vector<std::size_t> hidden;
    Activation activation = Activation::identity;
    LossKind loss = LossKind::mse;
    DatasetSpec data;
    // Resume: steps already taken by the checkpointed state.
    std::size_t start_step = 0;

    ModelSpec model_spec() const;
    // Throws ConfigError on out-of-range fields.
    void validate() const;
};

struct EvalSummary {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double accuracy = -1.0;  // classification only; negative when not applicable
};

struct RunReport {
    TrainConfig config;
    std::vector<double> losses;  // one training-batch loss per executed step
    OpCounters counters;
    std::size_t saturation_events = 0;
    std::size_t applied_rows = 0;
    double wall_time_ms = 0.0;
    EvalSummary eval;
};

/// Model plus optimizer: everything a run mutates.
struct Session {
    ToyModel model;
    AdamW optimizer;
};

/// Fresh model for `config` on `data` (weights from data.pretrained or the
/// seed) with a zeroed optimizer.
Session make_session(const TrainConfig& config, const Dataset& data);

/// Runs steps start_step+1 .. steps. Per step: forward (one batch), loss,
/// backward, one AdamW step per adapter factor, and for melded layers the
/// buffer fold-in with top-k application. Throws NumericalError on a
/// non-finite loss.
RunReport train(Session& session, const TrainConfig& config, const Dataset& data);

/// Convenience: synthetic_dataset + make_session + train.
RunReport run_experiment(const TrainConfig& config);

/// Mean eval loss (and accuracy for classification) of the current model.
EvalSummary evaluate(const ToyModel& model, const Dataset& data, LossKind loss);

std::string to_json(const TrainConfig& config, int indent = -1);
/// RunReport as JSON. With include_wall_time=false the timing field is
/// written as 0 so that reports of identical runs compare equal.
std::string to_json(const RunReport& report, bool include_wall_time = true, int indent = 2);

}  // namespace falqon
