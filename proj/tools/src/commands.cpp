// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon_cli/commands.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "falqon/checkpoint.hpp"
#include "falqon/error.hpp"
#include "falqon/fp8.hpp"
#include "falqon/svd.hpp"
#include "falqon/tensor_ops.hpp"

namespace falqon::cli {

namespace {

std::string real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw FormatError("cannot write " + path.string());
}

bool fp8_arms(ModelVariant v) { return v == ModelVariant::melded || v == ModelVariant::explicit_fp8; }

// Runs `body` and maps library errors onto exit codes.
template <typename Body>
int guarded(std::ostream& err, Body body) {
    try {
        return body();
    } catch (const NumericalError& e) {
        err << "error: numerical failure: " << e.what() << '\n';
        return kExitNumericalError;
    } catch (const ConfigError& e) {
        err << "error: config: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
}

std::string counters_rows(std::string_view arm, const OpCounters& c) {
    std::string s;
    for (Phase p : kAllPhases) {
        const PhaseCounters& pc = c.at(p);
        s += std::string(arm) + ',' + std::string(to_string(p)) + ',' + std::to_string(pc.quantize_ops) + ',' +
             std::to_string(pc.quantize_elements) + ',' + std::to_string(pc.dequantize_elements) + ',' +
             std::to_string(pc.matmul_flops) + ',' + std::to_string(pc.bytes_moved) + '\n';
    }
    return s;
}

}  // namespace

unsigned worker_threads() {
    const char* env = std::getenv("FALQON_THREADS");
    if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError(std::string("FALQON_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(v);
}

Comparison run_comparison(const RunConfig& config, unsigned threads) {
    const bool fp8 = fp8_arms(config.train.variant);
    std::vector<TrainConfig> arms(3, config.train);
    arms[0].variant = fp8 ? ModelVariant::melded : ModelVariant::melded_full;
    arms[1].variant = fp8 ? ModelVariant::explicit_fp8 : ModelVariant::explicit_full;
    arms[2].variant = ModelVariant::explicit_full;
    arms[2].lora_init = LoraInit::melded_equivalent;
    for (TrainConfig& a : arms) a.start_step = 0;

    std::vector<RunReport> reports(3);
    const unsigned workers = std::max(1u, std::min(threads, 3u));
    for (std::size_t first = 0; first < arms.size(); first += workers) {
        std::vector<std::future<RunReport>> pending;
        for (std::size_t i = first; i < std::min(arms.size(), first + workers); ++i) {
            pending.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async,
                                         [&arms, i] { return run_experiment(arms[i]); }));
        }
        for (std::size_t i = 0; i < pending.size(); ++i) reports[first + i] = pending[i].get();
    }
    return Comparison{std::move(reports[0]), std::move(reports[1]), std::move(reports[2])};
}

std::string comparison_csv(const Comparison& cmp, const CostParams& params) {
    const std::string m(to_string(cmp.melded.config.variant));
    const std::string e(to_string(cmp.explicit_lora.config.variant));
    std::string s = "# losses\nstep," + m + ',' + e + ",oracle\n";
    const std::size_t steps = cmp.melded.losses.size();
    for (std::size_t i = 0; i < steps; ++i) {
        s += std::to_string(i + 1) + ',' + real(cmp.melded.losses[i]) + ',' + real(cmp.explicit_lora.losses[i]) + ',' +
             real(cmp.oracle.losses[i]) + '\n';
    }
    s += "# counters\narm,phase,quantize_ops,quantize_elements,dequantize_elements,matmul_flops,bytes_moved\n";
    s += counters_rows(m, cmp.melded.counters);
    s += counters_rows(e, cmp.explicit_lora.counters);
    s += counters_rows("oracle", cmp.oracle.counters);
    s += "# modeled_times\n";
    std::vector<BreakdownRow> rows = render_breakdown(cmp.melded, params);
    const auto more = render_breakdown(cmp.explicit_lora, params);
    rows.insert(rows.end(), more.begin(), more.end());
    std::vector<BreakdownRow> oracle_rows = render_breakdown(cmp.oracle.counters, params, "oracle", false);
    rows.insert(rows.end(), oracle_rows.begin(), oracle_rows.end());
    s += breakdown_csv(rows);
    return s;
}

int cmd_train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load_run_config(config_path);
        const TrainConfig& tc = cfg.train;
        const bool checkpointable = tc.variant == ModelVariant::melded;
        if ((!cfg.outputs.checkpoint.empty() || !cfg.outputs.resume_checkpoint.empty()) && !checkpointable) {
            throw ConfigError("checkpoints require run.variant = melded");
        }
        if (cfg.outputs.resume_checkpoint.empty() && tc.start_step != 0) {
            throw ConfigError("run.start_step requires output.resume_checkpoint");
        }
        const Dataset data = synthetic_dataset(tc.data, tc.seed);
        Session session = make_session(tc, data);
        if (!cfg.outputs.resume_checkpoint.empty()) {
            restore_checkpoint(load_checkpoint(cfg.outputs.resume_checkpoint), session, tc.buffer_mode);
        }
        const RunReport report = train(session, tc, data);

        const std::string json = to_json(report);
        if (cfg.outputs.report.empty()) {
            out << json << '\n';
        } else {
            write_text(cfg.outputs.report, json + '\n');
        }
        if (!cfg.outputs.checkpoint.empty()) {
            if (cfg.outputs.checkpoint.has_parent_path()) {
                std::filesystem::create_directories(cfg.outputs.checkpoint.parent_path());
            }
            save_checkpoint(cfg.outputs.checkpoint, capture_checkpoint(session));
        }
        if (!cfg.outputs.breakdown.empty()) {
            write_text(cfg.outputs.breakdown, breakdown_csv(render_breakdown(report, cfg.cost)));
        }
        err << "trained " << report.losses.size() << " steps: eval loss " << report.eval.initial_loss << " -> "
            << report.eval.final_loss << ", quantize ops " << report.counters.total().quantize_ops << '\n';
        return kExitOk;
    });
}

int cmd_compare(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig cfg = load_run_config(config_path);
        if (cfg.train.start_step != 0 || !cfg.outputs.resume_checkpoint.empty()) {
            throw ConfigError("compare always trains from scratch; remove start_step/resume_checkpoint");
        }
        const unsigned threads = worker_threads();
        const Comparison cmp = run_comparison(cfg, threads);
        const std::string csv = comparison_csv(cmp, cfg.cost);
        if (cfg.outputs.comparison.empty()) {
            out << csv;
        } else {
            write_text(cfg.outputs.comparison, csv);
        }
        const auto mq = cmp.melded.counters.total().quantize_ops;
        const auto eq = cmp.explicit_lora.counters.total().quantize_ops;
        std::ostringstream line;
        line << "summary: quantize_ops " << to_string(cmp.melded.config.variant) << '=' << mq << ' '
             << to_string(cmp.explicit_lora.config.variant) << '=' << eq << " ratio="
             << (mq > 0 ? real(static_cast<double>(eq) / static_cast<double>(mq)) : std::string("inf"))
             << " final_eval_loss " << real(cmp.melded.eval.final_loss) << ' '
             << real(cmp.explicit_lora.eval.final_loss) << " oracle=" << real(cmp.oracle.eval.final_loss);
        (cfg.outputs.comparison.empty() ? err : out) << line.str() << '\n';
        return kExitOk;
    });
}

int cmd_fp8_table(std::string_view format, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Fp8Tag tag;
        try {
            tag = parse_fp8_tag(format);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        const Fp8Format& f = format_of(tag);
        const auto& table = decode_table(tag);
        out << "code,hex,sign,exponent,mantissa,class,value\n";
        for (int c = 0; c < 256; ++c) {
            const int sign = c >> 7;
            const int exponent = (c >> f.mantissa_bits) & ((1 << f.exponent_bits) - 1);
            const int mantissa = c & ((1 << f.mantissa_bits) - 1);
            const double v = table[static_cast<std::size_t>(c)];
            const char* cls = std::isnan(v) ? "nan" : std::isinf(v) ? "inf" : v == 0.0 ? "zero"
                              : exponent == 0 ? "subnormal" : "normal";
            char hex[8];
            std::snprintf(hex, sizeof hex, "0x%02X", c);
            out << c << ',' << hex << ',' << sign << ',' << exponent << ',' << mantissa << ',' << cls << ','
                << real(v) << '\n';
        }
        return kExitOk;
    });
}

int cmd_svd_check(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed, std::ostream& out,
                  std::ostream& err) {
    return guarded(err, [&] {
        if (m == 0 || n == 0) throw ConfigError("--m and --n must be positive");
        if (r == 0 || r > std::min(m, n)) throw ConfigError("--r must lie in [1, min(m, n)]");
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        Matrix a(m, n);
        for (double& v : a.values()) v = dist(rng);

        const TruncatedSvd svd = truncated_svd(a, r);
        Eigen::MatrixXd ea(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) ea(i, j) = a(i, j);
        }
        const Eigen::JacobiSVD<Eigen::MatrixXd> ref(ea);
        const Eigen::VectorXd& s = ref.singularValues();

        double sv_err = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            sv_err = std::max(sv_err, std::abs(svd.singular_values[i] - s(i)) / std::max(s(0), 1e-300));
        }
        double tail = 0.0;
        for (Eigen::Index i = static_cast<Eigen::Index>(r); i < s.size(); ++i) tail += s(i) * s(i);
        const Matrix resid = a - reconstruct(svd);
        const double residual = frobenius_norm(resid);
        const double expected = std::sqrt(tail);
        const double residual_err = std::abs(residual * residual - tail) / std::max(s(0) * s(0), 1e-300);
        const Matrix utu = matmul(svd.u.transposed(), svd.u);
        const Matrix vvt = matmul(svd.vt, svd.vt.transposed());
        const double orth = std::max(max_abs(utu - Matrix::identity(r)), max_abs(vvt - Matrix::identity(r)));

        nlohmann::ordered_json j;
        j["m"] = m;
        j["n"] = n;
        j["r"] = r;
        j["seed"] = seed;
        j["max_singular_value_rel_error"] = sv_err;
        j["residual_fro"] = residual;
        j["oracle_tail_fro"] = expected;
        j["residual_sq_rel_error"] = residual_err;
        j["orthogonality_error"] = orth;
        j["pass"] = sv_err < 1e-10 && residual_err < 1e-8 && orth < 1e-10;
        out << j.dump(2) << '\n';
        return kExitOk;
    });
}

int cmd_overhead(const std::optional<std::filesystem::path>& params_path, const LayerDims& dims, std::ostream& out,
                 std::ostream& err) {
    return guarded(err, [&] {
        const CostParams params = params_path ? load_cost_params(*params_path) : CostParams{};
        if (!(dims.m > 0 && dims.n > 0 && dims.d > 0)) throw ConfigError("--m, --n and --d must be positive");
        std::vector<double> ranks;
        for (double r = 1; r <= 8192; r *= 2) ranks.push_back(r);
        const std::uint64_t crossover = crossover_dim(params);
        out << "rank,fp16_s,fp8_s,ratio,crossover_dim\n";
        for (const SpeedupPoint& p : speedup_curve(ranks, dims, params)) {
            out << p.rank << ',' << real(p.fp16_s) << ',' << real(p.fp8_s) << ',' << real(p.ratio) << ','
                << crossover << '\n';
        }
        return kExitOk;
    });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"falqon: FP8 melded low-rank adaptation toolkit"};
    app.require_subcommand(1);

    std::string train_cfg;
    auto* train_cmd = app.add_subcommand("train", "train one model and write report, checkpoint and breakdown");
    train_cmd->add_option("-c,--config", train_cfg, "INI run config")->required();

    std::string compare_cfg;
    auto* compare_cmd = app.add_subcommand("compare", "train melded, explicit and oracle arms side by side");
    compare_cmd->add_option("-c,--config", compare_cfg, "INI run config")->required();

    std::string format;
    auto* table_cmd = app.add_subcommand("fp8-table", "print all 256 codes of an FP8 format");
    table_cmd->add_option("--format", format, "e4m3 or e5m2")
        ->required()
        ->check(CLI::IsMember({"e4m3", "e5m2"}, CLI::ignore_case));

    std::size_t m = 64, n = 48, r = 8;
    std::uint64_t seed = 0;
    auto* svd_cmd = app.add_subcommand("svd-check", "compare the truncated SVD against an Eigen reference");
    svd_cmd->add_option("--m", m, "rows")->check(CLI::PositiveNumber);
    svd_cmd->add_option("--n", n, "columns")->check(CLI::PositiveNumber);
    svd_cmd->add_option("--r", r, "rank")->check(CLI::PositiveNumber);
    svd_cmd->add_option("--seed", seed, "matrix seed");

    std::string params;
    LayerDims dims;
    auto* overhead_cmd = app.add_subcommand("overhead", "print the modeled FP8/FP16 adapter speedup curve");
    overhead_cmd->add_option("--params", params, "INI file with a [cost] section");
    overhead_cmd->add_option("--m", dims.m, "backbone rows")->check(CLI::PositiveNumber);
    overhead_cmd->add_option("--n", dims.n, "backbone columns")->check(CLI::PositiveNumber);
    overhead_cmd->add_option("--d", dims.d, "tokens per step")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfigError;
    }
    if (*train_cmd) return cmd_train(train_cfg, out, err);
    if (*compare_cmd) return cmd_compare(compare_cfg, out, err);
    if (*table_cmd) return cmd_fp8_table(format, out, err);
    if (*svd_cmd) return cmd_svd_check(m, n, r, seed, out, err);
    return cmd_overhead(params.empty() ? std::nullopt : std::optional<std::filesystem::path>(params), dims, out, err);
}

}  // namespace falqon::cli
