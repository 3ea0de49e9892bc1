// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/train.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include <json.hpp>

#include "falqon/error.hpp"

namespace falqon {

namespace {

using nlohmann::ordered_json;

ordered_json config_json(const TrainConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["steps"] = c.steps;
    j["batch"] = c.batch;
    j["rank"] = c.rank;
    j["top_k"] = c.top_k;
    j["lr"] = c.optimizer.lr;
    j["beta1"] = c.optimizer.beta1;
    j["beta2"] = c.optimizer.beta2;
    j["eps"] = c.optimizer.eps;
    j["weight_decay"] = c.optimizer.weight_decay;
    j["buffer_mode"] = to_string(c.buffer_mode);
    j["variant"] = to_string(c.variant);
    j["lora_init"] = to_string(c.lora_init);
    j["hidden"] = c.hidden;
    j["activation"] = to_string(c.activation);
    j["loss"] = to_string(c.loss);
    j["start_step"] = c.start_step;
    ordered_json d;
    d["task"] = to_string(c.data.task);
    d["in_features"] = c.data.in_features;
    d["out_features"] = c.data.out_features;
    d["train_samples"] = c.data.train_samples;
    d["eval_samples"] = c.data.eval_samples;
    d["weight_std"] = c.data.weight_std;
    d["drift"] = c.data.drift;
    d["input_rank"] = c.data.input_rank;
    d["noise"] = c.data.noise;
    d["separation"] = c.data.separation;
    j["data"] = d;
    return j;
}

ordered_json counters_json(const PhaseCounters& p) {
    ordered_json j;
    j["quantize_ops"] = p.quantize_ops;
    j["quantize_elements"] = p.quantize_elements;
    j["dequantize_elements"] = p.dequantize_elements;
    j["matmul_flops"] = p.matmul_flops;
    j["bytes_moved"] = p.bytes_moved;
    return j;
}

Matrix adapter_b(const ModelLayer& layer) {
    return std::get<ExplicitLoraLayer>(layer).b();
}

}  // namespace

ModelSpec TrainConfig::model_spec() const {
    ModelSpec s;
    s.variant = variant;
    s.rank = rank;
    s.top_k = top_k;
    s.buffer_mode = buffer_mode;
    s.lora_init = lora_init;
    s.activation = activation;
    s.loss = loss;
    return s;
}

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(batch > 0, "batch must be positive");
    require(rank > 0, "rank must be positive");
    require(top_k > 0, "top_k must be positive");
    require(start_step <= steps, "start_step exceeds steps");
    require(optimizer.lr >= 0.0 && std::isfinite(optimizer.lr), "lr must be finite and non-negative");
    require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "beta1 must lie in [0, 1)");
    require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "beta2 must lie in [0, 1)");
    require(optimizer.eps > 0.0, "eps must be positive");
    require(optimizer.weight_decay >= 0.0, "weight_decay must be non-negative");
    require(data.in_features > 0 && data.out_features > 0, "model dims must be positive");
    require(data.train_samples > 0 && data.eval_samples > 0, "sample counts must be positive");
    require(data.input_rank <= data.in_features, "input_rank exceeds in_features");
    require(data.weight_std >= 0.0 && data.drift >= 0.0 && data.noise >= 0.0 && data.separation >= 0.0,
            "scale parameters must be non-negative");
    for (std::size_t h : hidden) require(h > 0, "hidden sizes must be positive");
    if (data.task == Task::classification_blobs) {
        require(loss == LossKind::cross_entropy, "classification_blobs requires loss = cross_entropy");
        require(data.out_features >= 2, "classification_blobs needs at least two classes");
    } else {
        require(loss == LossKind::mse, "linear_teacher requires loss = mse");
    }
}

Session make_session(const TrainConfig& config, const Dataset& data) {
    const std::vector<Matrix> weights = initial_weights(data.pretrained, config.hidden, config.seed ^ 0x5eedull);
    ToyModel model = ToyModel::build(config.model_spec(), weights, config.seed ^ 0xada9ull);
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (const auto& layer : model.layers()) {
        std::visit([&](const auto& l) { shapes.emplace_back(l.out_features(), l.rank()); }, layer);
    }
    if (model.trains_a()) {
        for (const auto& layer : model.layers()) {
            std::visit([&](const auto& l) { shapes.emplace_back(l.rank(), l.in_features()); }, layer);
        }
    }
    return Session{std::move(model), AdamW(config.optimizer, shapes)};
}

EvalSummary evaluate(const ToyModel& model, const Dataset& data, LossKind loss) {
    EvalSummary e;
    const Matrix out = model.infer(data.eval_x);
    if (loss == LossKind::mse) {
        e.final_loss = mse_loss(out, data.eval_y).loss;
    } else {
        e.final_loss = cross_entropy_loss(out, data.eval_labels).loss;
        e.accuracy = accuracy(out, data.eval_labels);
    }
    e.initial_loss = e.final_loss;
    return e;
}

RunReport train(Session& session, const TrainConfig& config, const Dataset& data) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    ToyModel& model = session.model;
    AdamW& opt = session.optimizer;
    const std::size_t layers = model.layer_count();

    RunReport report;
    report.config = config;
    report.eval = evaluate(model, data, config.loss);
    opt.set_step_count(config.start_step);

    for (std::size_t step = config.start_step + 1; step <= config.steps; ++step) {
        const Batch batch = training_batch(data, step, config.batch);

        report.counters.set_phase(Phase::forward);
        const Matrix out = model.forward(batch.x, &report.counters);
        const LossValue lv = config.loss == LossKind::mse ? mse_loss(out, batch.y)
                                                          : cross_entropy_loss(out, batch.labels);
        if (!std::isfinite(lv.loss)) {
            for (auto& layer : model.layers()) std::visit([](auto& l) { l.clear_context(); }, layer);
            throw NumericalError("non-finite loss at step " + std::to_string(step));
        }
        report.losses.push_back(lv.loss);

        report.counters.set_phase(Phase::backward);
        const std::vector<LayerGradients> grads = model.backward(lv.grad, &report.counters);

        report.counters.set_phase(Phase::update);
        opt.begin_step();
        for (std::size_t l = 0; l < layers; ++l) {
            ModelLayer& layer = model.layers()[l];
            if (auto* melded = std::get_if<MeldedLinear>(&layer)) {
                const Matrix delta = opt.step(l, grads[l].grad_b);
                const UpdateResult res = melded->apply_update(delta, &report.counters);
                report.saturation_events += res.saturated;
                report.applied_rows += res.rows.size();
            } else {
                auto& lora = std::get<ExplicitLoraLayer>(layer);
                const Matrix b = adapter_b(layer);
                lora.b() += opt.step(l, grads[l].grad_b, &b);
                if (model.trains_a()) {
                    const Matrix a = lora.a();
                    lora.a() += opt.step(layers + l, grads[l].grad_a, &a);
                }
            }
        }
    }

    const EvalSummary after = evaluate(model, data, config.loss);
    report.eval.final_loss = after.final_loss;
    report.eval.accuracy = after.accuracy;
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return report;
}

RunReport run_experiment(const TrainConfig& config) {
    config.validate();
    const Dataset data = synthetic_dataset(config.data, config.seed);
    Session session = make_session(config, data);
    return train(session, config, data);
}

std::string to_json(const TrainConfig& config, int indent) { return config_json(config).dump(indent); }

std::string to_json(const RunReport& report, bool include_wall_time, int indent) {
    ordered_json j;
    j["config"] = config_json(report.config);
    j["losses"] = report.losses;
    ordered_json counters;
    for (Phase p : kAllPhases) counters[std::string(to_string(p))] = counters_json(report.counters.at(p));
    j["counters"] = counters;
    j["saturation_events"] = report.saturation_events;
    j["applied_rows"] = report.applied_rows;
    j["wall_time_ms"] = include_wall_time ? report.wall_time_ms : 0.0;
    ordered_json eval;
    eval["initial_loss"] = report.eval.initial_loss;
    eval["final_loss"] = report.eval.final_loss;
    if (report.eval.accuracy >= 0.0) {
        eval["accuracy"] = report.eval.accuracy;
    } else {
        eval["accuracy"] = nullptr;
    }
    j["eval"] = eval;
    return j.dump(indent);
}

}  // namespace falqon
