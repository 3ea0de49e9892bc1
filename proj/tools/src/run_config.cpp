// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon_cli/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "falqon/error.hpp"

namespace falqon::cli {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Section = std::map<std::string, Setter, std::less<>>;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& raw, std::string_view key) {
    const std::string s = trim(raw);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("invalid value '" + raw + "' for " + std::string(key));
    }
    return v;
}

template <typename Parse>
auto parse_enum(const std::string& raw, std::string_view key, Parse parse) {
    try {
        return parse(trim(raw));
    } catch (const DomainError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

std::vector<std::size_t> parse_list(const std::string& raw, std::string_view key) {
    std::vector<std::size_t> out;
    const std::string s = trim(raw);
    if (s.empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(parse_number<std::size_t>(item, key));
    return out;
}

template <typename T, typename Field>
Setter number(Field field, std::string key) {
    return [field, key](RunConfig& c, const std::string& v) { field(c) = parse_number<T>(v, key); };
}

std::map<std::string, Section, std::less<>> schema(const std::filesystem::path& base) {
    auto path_setter = [base](std::filesystem::path OutputPaths::*member) -> Setter {
        return [base, member](RunConfig& c, const std::string& v) {
            const std::filesystem::path p = trim(v);
            c.outputs.*member = p.empty() || p.is_absolute() || base.empty() ? p : base / p;
        };
    };
    std::map<std::string, Section, std::less<>> s;
    s["run"] = {
        {"seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.seed; }, "run.seed")},
        {"steps", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.steps; }, "run.steps")},
        {"batch", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.batch; }, "run.batch")},
        {"rank", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.rank; }, "run.rank")},
        {"top_k", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.top_k; }, "run.top_k")},
        {"start_step",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.start_step; }, "run.start_step")},
        {"variant",
         [](RunConfig& c, const std::string& v) { c.train.variant = parse_enum(v, "run.variant", parse_variant); }},
        {"buffer_mode",
         [](RunConfig& c, const std::string& v) {
             c.train.buffer_mode = parse_enum(v, "run.buffer_mode", parse_buffer_mode);
         }},
        {"lora_init",
         [](RunConfig& c, const std::string& v) {
             c.train.lora_init = parse_enum(v, "run.lora_init", parse_lora_init);
         }},
        {"activation",
         [](RunConfig& c, const std::string& v) {
             c.train.activation = parse_enum(v, "run.activation", parse_activation);
         }},
        {"loss", [](RunConfig& c, const std::string& v) { c.train.loss = parse_enum(v, "run.loss", parse_loss); }},
        {"hidden", [](RunConfig& c, const std::string& v) { c.train.hidden = parse_list(v, "run.hidden"); }},
    };
    s["optimizer"] = {
        {"lr", number<double>([](RunConfig& c) -> auto& { return c.train.optimizer.lr; }, "optimizer.lr")},
        {"beta1", number<double>([](RunConfig& c) -> auto& { return c.train.optimizer.beta1; }, "optimizer.beta1")},
        {"beta2", number<double>([](RunConfig& c) -> auto& { return c.train.optimizer.beta2; }, "optimizer.beta2")},
        {"eps", number<double>([](RunConfig& c) -> auto& { return c.train.optimizer.eps; }, "optimizer.eps")},
        {"weight_decay",
         number<double>([](RunConfig& c) -> auto& { return c.train.optimizer.weight_decay; },
                        "optimizer.weight_decay")},
    };
    s["data"] = {
        {"task", [](RunConfig& c, const std::string& v) { c.train.data.task = parse_enum(v, "data.task", parse_task); }},
        {"in_features",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.data.in_features; }, "data.in_features")},
        {"out_features",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.data.out_features; }, "data.out_features")},
        {"train_samples",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.data.train_samples; },
                             "data.train_samples")},
        {"eval_samples",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.data.eval_samples; }, "data.eval_samples")},
        {"weight_std",
         number<double>([](RunConfig& c) -> auto& { return c.train.data.weight_std; }, "data.weight_std")},
        {"drift", number<double>([](RunConfig& c) -> auto& { return c.train.data.drift; }, "data.drift")},
        {"input_rank",
         number<std::size_t>([](RunConfig& c) -> auto& { return c.train.data.input_rank; }, "data.input_rank")},
        {"noise", number<double>([](RunConfig& c) -> auto& { return c.train.data.noise; }, "data.noise")},
        {"separation",
         number<double>([](RunConfig& c) -> auto& { return c.train.data.separation; }, "data.separation")},
    };
    s["cost"] = {
        {"mem_bandwidth",
         number<double>([](RunConfig& c) -> auto& { return c.cost.mem_bandwidth; }, "cost.mem_bandwidth")},
        {"fp16_throughput",
         number<double>([](RunConfig& c) -> auto& { return c.cost.fp16_throughput; }, "cost.fp16_throughput")},
        {"fp8_throughput",
         number<double>([](RunConfig& c) -> auto& { return c.cost.fp8_throughput; }, "cost.fp8_throughput")},
        {"quantize_bytes_per_elem",
         number<double>([](RunConfig& c) -> auto& { return c.cost.quantize_bytes_per_elem; },
                        "cost.quantize_bytes_per_elem")},
    };
    s["output"] = {
        {"report", path_setter(&OutputPaths::report)},
        {"checkpoint", path_setter(&OutputPaths::checkpoint)},
        {"breakdown", path_setter(&OutputPaths::breakdown)},
        {"comparison", path_setter(&OutputPaths::comparison)},
        {"resume_checkpoint", path_setter(&OutputPaths::resume_checkpoint)},
    };
    return s;
}

RunConfig parse_sections(std::string_view text, const std::filesystem::path& base_dir, bool cost_only) {
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " (line " + std::to_string(e.line()) +
                          ")");
    }
    const auto sections = schema(base_dir);
    RunConfig config;
    for (const auto& [section, keys] : tree) {
        if (keys.empty() && !keys.data().empty()) {
            throw ConfigError("key '" + section + "' must appear inside a section");
        }
        const auto found = sections.find(section);
        if (found == sections.end() || (cost_only && section != "cost")) {
            throw ConfigError("unknown section [" + section + "]");
        }
        for (const auto& [key, value] : keys) {
            const auto setter = found->second.find(key);
            if (setter == found->second.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            setter->second(config, value.data());
        }
    }
    config.train.validate();
    try {
        config.cost.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return config;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
    return parse_sections(text, base_dir, false);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_file(path), path.parent_path());
}

CostParams load_cost_params(const std::filesystem::path& path) { return parse_sections(read_file(path), {}, true).cost; }

std::string render_run_config(const RunConfig& c) {
    const TrainConfig& t = c.train;
    std::ostringstream o;
    std::string hidden;
    for (std::size_t i = 0; i < t.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(t.hidden[i]);
    o << "[run]\n"
      << "seed = " << t.seed << "\nsteps = " << t.steps << "\nbatch = " << t.batch << "\nrank = " << t.rank
      << "\ntop_k = " << t.top_k << "\nstart_step = " << t.start_step << "\nvariant = " << to_string(t.variant)
      << "\nbuffer_mode = " << to_string(t.buffer_mode) << "\nlora_init = " << to_string(t.lora_init)
      << "\nactivation = " << to_string(t.activation) << "\nloss = " << to_string(t.loss) << "\nhidden = " << hidden
      << "\n\n[optimizer]\n"
      << "lr = " << real(t.optimizer.lr) << "\nbeta1 = " << real(t.optimizer.beta1)
      << "\nbeta2 = " << real(t.optimizer.beta2) << "\neps = " << real(t.optimizer.eps)
      << "\nweight_decay = " << real(t.optimizer.weight_decay) << "\n\n[data]\n"
      << "task = " << to_string(t.data.task) << "\nin_features = " << t.data.in_features
      << "\nout_features = " << t.data.out_features << "\ntrain_samples = " << t.data.train_samples
      << "\neval_samples = " << t.data.eval_samples << "\nweight_std = " << real(t.data.weight_std)
      << "\ndrift = " << real(t.data.drift) << "\ninput_rank = " << t.data.input_rank
      << "\nnoise = " << real(t.data.noise) << "\nseparation = " << real(t.data.separation) << "\n\n[cost]\n"
      << "mem_bandwidth = " << real(c.cost.mem_bandwidth) << "\nfp16_throughput = " << real(c.cost.fp16_throughput)
      << "\nfp8_throughput = " << real(c.cost.fp8_throughput)
      << "\nquantize_bytes_per_elem = " << real(c.cost.quantize_bytes_per_elem) << "\n\n[output]\n"
      << "report = " << c.outputs.report.string() << "\ncheckpoint = " << c.outputs.checkpoint.string()
      << "\nbreakdown = " << c.outputs.breakdown.string() << "\ncomparison = " << c.outputs.comparison.string()
      << "\nresume_checkpoint = " << c.outputs.resume_checkpoint.string() << "\n";
    return o.str();
}

}  // namespace falqon::cli
