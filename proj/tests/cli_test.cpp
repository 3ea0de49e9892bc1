// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "falqon/checkpoint.hpp"
#include "falqon/error.hpp"
#include "falqon_cli/commands.hpp"
#include "falqon_cli/run_config.hpp"

namespace falqon::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "falqon");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

class CliTest : public ::testing::Test {
 protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("falqon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir;
};

// Small teacher that trains in well under a second.
const char* kSmall =
    "[run]\nsteps = 20\nrank = 4\ntop_k = 3\nseed = 3\n"
    "[optimizer]\nlr = 0.05\n"
    "[data]\nin_features = 12\nout_features = 10\ntrain_samples = 128\neval_samples = 32\n"
    "weight_std = 0.05\ninput_rank = 3\n";

TEST(RunConfig, EmptyTextGivesDefaults) {
    const RunConfig c = parse_run_config("");
    EXPECT_EQ(c.train.rank, 64u);
    EXPECT_EQ(c.train.top_k, 10u);
    EXPECT_EQ(c.train.optimizer.lr, 2e-4);
    EXPECT_EQ(c.train.steps, 200u);
    EXPECT_EQ(c.cost.mem_bandwidth, CostParams{}.mem_bandwidth);
    EXPECT_TRUE(c.outputs.report.empty());
}

TEST(RunConfig, ParsesEveryField) {
    const RunConfig c = parse_run_config(
        "[run]\nseed = 9\nsteps = 5\nbatch = 4\nrank = 2\ntop_k = 1\nstart_step = 0\nvariant = explicit_fp8\n"
        "buffer_mode = overwrite\nlora_init = standard\nactivation = gelu\nloss = mse\nhidden = 7, 5\n"
        "[optimizer]\nlr = 0.5\nbeta1 = 0.8\nbeta2 = 0.9\neps = 1e-6\nweight_decay = 0.01\n"
        "[data]\ntask = linear_teacher\nin_features = 8\nout_features = 6\ntrain_samples = 10\neval_samples = 3\n"
        "weight_std = 0.2\ndrift = 0.5\ninput_rank = 2\nnoise = 0.1\nseparation = 4\n"
        "[cost]\nmem_bandwidth = 2e12\nfp16_throughput = 1e14\nfp8_throughput = 3e14\nquantize_bytes_per_elem = 9\n"
        "[output]\nreport = out/r.json\ncheckpoint = /abs/c.bin\n",
        "/base");
    EXPECT_EQ(c.train.seed, 9u);
    EXPECT_EQ(c.train.variant, ModelVariant::explicit_fp8);
    EXPECT_EQ(c.train.buffer_mode, BufferMode::overwrite);
    EXPECT_EQ(c.train.activation, Activation::gelu);
    EXPECT_EQ(c.train.hidden, (std::vector<std::size_t>{7, 5}));
    EXPECT_EQ(c.train.optimizer.weight_decay, 0.01);
    EXPECT_EQ(c.train.data.input_rank, 2u);
    EXPECT_EQ(c.cost.quantize_bytes_per_elem, 9.0);
    EXPECT_EQ(c.outputs.report, fs::path("/base/out/r.json"));
    EXPECT_EQ(c.outputs.checkpoint, fs::path("/abs/c.bin"));
}

TEST(RunConfig, RenderedConfigParsesBackToTheSameValues) {
    RunConfig c = parse_run_config("[run]\nhidden = 3\nactivation = relu\n[optimizer]\nlr = 0.1234567\n");
    const RunConfig back = parse_run_config(render_run_config(c));
    EXPECT_EQ(render_run_config(back), render_run_config(c));
    EXPECT_EQ(back.train.optimizer.lr, 0.1234567);
}

TEST(RunConfig, ShippedConfigsParse) {
    const fs::path configs = FALQON_CONFIG_DIR;
    const RunConfig d = load_run_config(configs / "default.ini");
    const RunConfig builtin = parse_run_config("");
    EXPECT_EQ(to_json(d.train), to_json(builtin.train));
    EXPECT_EQ(d.cost.fp16_throughput, builtin.cost.fp16_throughput);
    EXPECT_EQ(d.cost.fp8_throughput, builtin.cost.fp8_throughput);
    EXPECT_EQ(d.outputs.report, configs / "out/report.json");
    EXPECT_NO_THROW(load_run_config(configs / "blobs.ini"));
}

TEST(RunConfig, RejectsBadInput) {
    for (const char* text : {"[run]\nstepz = 1\n", "[runs]\nsteps = 1\n", "steps = 1\n", "[run]\nsteps = -1\n",
                             "[run]\nsteps = 1x\n", "[run]\nsteps = 1\nsteps = 2\n", "[run]\nvariant = lora\n",
                             "[run]\nbatch = 0\n", "[optimizer]\nlr = nan\n", "[data]\ntask = blobs\n",
                             "[cost]\nfp8_throughput = 1\n", "[run\nsteps = 1\n", "[run]\nhidden = 4,,2\n"}) {
        EXPECT_THROW(parse_run_config(text), ConfigError) << text;
    }
}

TEST_F(CliTest, Fp8TableRows) {
    const Result r = run({"fp8-table", "--format", "e4m3"});
    ASSERT_EQ(r.code, kExitOk);
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 257u);
    EXPECT_EQ(rows[1], "0,0x00,0,0,0,zero,0");
    EXPECT_EQ(rows[1 + 0x7E], "126,0x7E,0,15,6,normal,448");
    EXPECT_NE(rows[1 + 0x7F].find("nan"), std::string::npos);
    const Result e5 = run({"fp8-table", "--format", "E5M2"});
    ASSERT_EQ(e5.code, kExitOk);
    EXPECT_EQ(lines(e5.out)[1 + 0x7B], "123,0x7B,0,30,3,normal,57344");
    EXPECT_EQ(lines(e5.out)[1 + 0x7C], "124,0x7C,0,31,0,inf,inf");
    EXPECT_EQ(run({"fp8-table", "--format", "e3m4"}).code, kExitConfigError);
    EXPECT_EQ(run({"fp8-table"}).code, kExitConfigError);
}

TEST_F(CliTest, OverheadCrossoverColumnInRange) {
    const Result r = run({"overhead"});
    ASSERT_EQ(r.code, kExitOk);
    const auto rows = lines(r.out);
    EXPECT_EQ(rows[0], "rank,fp16_s,fp8_s,ratio,crossover_dim");
    const long crossover = std::stol(rows[1].substr(rows[1].rfind(',') + 1));
    EXPECT_GE(crossover, 2048);
    EXPECT_LE(crossover, 8192);
    const fs::path params = write("cost.ini", "[cost]\nfp16_throughput = 1e14\nfp8_throughput = 1e14\n");
    const Result none = run({"overhead", "--params", params.string()});
    ASSERT_EQ(none.code, kExitOk);
    EXPECT_NE(lines(none.out)[1].rfind(",0"), std::string::npos);
    EXPECT_EQ(run({"overhead", "--params", write("bad.ini", "[run]\nsteps = 1\n").string()}).code,
              kExitConfigError);
    EXPECT_EQ(run({"overhead", "--m", "-5"}).code, kExitConfigError);
}

TEST_F(CliTest, SvdCheckPassesAndValidatesFlags) {
    const Result r = run({"svd-check", "--m", "30", "--n", "45", "--r", "6", "--seed", "4"});
    ASSERT_EQ(r.code, kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["pass"].get<bool>());
    EXPECT_EQ(run({"svd-check", "--m", "5", "--n", "4", "--r", "5"}).code, kExitConfigError);
    EXPECT_EQ(run({"svd-check", "--r", "0"}).code, kExitConfigError);
}

TEST_F(CliTest, MinimalZeroStepConfigGivesEmptyReport) {
    const Result r = run({"train", "-c", write("min.ini", "[run]\nsteps = 0\n").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["losses"].empty());
    EXPECT_EQ(j["counters"]["forward"]["quantize_ops"], 0);
}

TEST_F(CliTest, CorruptConfigExitsOneWithoutOutputs) {
    const fs::path cfg = write("bad.ini", "[run]\nsteps = 2\nbogus = 1\n[output]\nreport = r.json\n"
                                          "checkpoint = c.bin\nbreakdown = b.csv\n");
    const Result r = run({"train", "-c", cfg.string()});
    EXPECT_EQ(r.code, kExitConfigError);
    EXPECT_NE(r.err.find("bogus"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "r.json"));
    EXPECT_FALSE(fs::exists(dir / "c.bin"));
    EXPECT_FALSE(fs::exists(dir / "b.csv"));
    EXPECT_EQ(run({"train", "-c", (dir / "missing.ini").string()}).code, kExitConfigError);
    const fs::path explicit_ckpt = write("e.ini", "[run]\nvariant = explicit_fp8\n[output]\ncheckpoint = c.bin\n");
    EXPECT_EQ(run({"train", "-c", explicit_ckpt.string()}).code, kExitConfigError);
}

TEST_F(CliTest, NonFiniteLossExitsTwo) {
    std::string text = kSmall;
    text.replace(text.find("weight_std = 0.05"), 17, "weight_std = 1e300");
    const Result r = run({"train", "-c", write("inf2.ini", text).string()});
    EXPECT_EQ(r.code, kExitNumericalError) << r.err;
    EXPECT_NE(r.err.find("numerical"), std::string::npos);
}

TEST_F(CliTest, TrainWritesAllOutputsAndReducesLoss) {
    const fs::path cfg = write("t.ini", std::string(kSmall) + "[output]\nreport = out/r.json\ncheckpoint = out/c.bin\n"
                                                              "breakdown = out/b.csv\n");
    const Result r = run({"train", "-c", cfg.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    std::ifstream in(dir / "out/r.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j["losses"].size(), 20u);
    EXPECT_LT(j["eval"]["final_loss"].get<double>(), j["eval"]["initial_loss"].get<double>());
    EXPECT_NO_THROW(load_checkpoint(dir / "out/c.bin"));
    std::ifstream csv(dir / "out/b.csv");
    std::stringstream ss;
    ss << csv.rdbuf();
    EXPECT_EQ(parse_breakdown_csv(ss.str()).size(), 3u);
}

TEST_F(CliTest, DefaultConfigReducesLoss) {
    const Result r = run({"train", "-c", write("d.ini", "").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_LT(j["eval"]["final_loss"].get<double>(), j["eval"]["initial_loss"].get<double>());
}

TEST_F(CliTest, ResumedTrainingMatchesUninterruptedRun) {
    const std::string base = kSmall;
    ASSERT_EQ(run({"train", "-c", write("full.ini", base + "[output]\nreport = full.json\ncheckpoint = full.bin\n")
                                      .string()})
                  .code,
              kExitOk);
    std::string head = base;
    head.replace(head.find("steps = 20"), 10, "steps = 8");
    ASSERT_EQ(run({"train", "-c", write("head.ini", head + "[output]\ncheckpoint = head.bin\nreport = h.json\n").string()})
                  .code,
              kExitOk);
    std::string tail = base;
    tail.replace(tail.find("steps = 20"), 10, "steps = 20\nstart_step = 8");
    const Result r = run({"train", "-c",
                          write("tail.ini", tail + "[output]\nresume_checkpoint = head.bin\ncheckpoint = tail.bin\n"
                                                   "report = tail.json\n")
                              .string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    std::ifstream fa(dir / "full.json"), fb(dir / "tail.json");
    const auto full = nlohmann::json::parse(fa);
    const auto part = nlohmann::json::parse(fb);
    ASSERT_EQ(part["losses"].size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(part["losses"][i].get<double>(), full["losses"][8 + i].get<double>());
    EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "tail.bin")), encode_checkpoint(load_checkpoint(dir / "full.bin")));
}

TEST_F(CliTest, CompareEmitsThreeSectionsAndSummary) {
    const fs::path cfg = write("c.ini", std::string(kSmall) + "[output]\ncomparison = cmp.csv\n");
    const Result r = run({"compare", "-c", cfg.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("summary: quantize_ops melded="), std::string::npos);
    std::ifstream in(dir / "cmp.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto rows = lines(ss.str());
    ASSERT_EQ(rows[0], "# losses");
    EXPECT_EQ(rows[1], "step,melded,explicit_fp8,oracle");
    EXPECT_EQ(rows[22], "# counters");
    EXPECT_EQ(rows[21].substr(0, 3), "20,");
    EXPECT_EQ(rows[24 + 9], "# modeled_times");
}

TEST(Compare, MeldedUsesFewerQuantizeOpsThanExplicit) {
    RunConfig c = parse_run_config(kSmall);
    const Comparison cmp = run_comparison(c, 3);
    EXPECT_LT(cmp.melded.counters.total().quantize_ops, cmp.explicit_lora.counters.total().quantize_ops);
    EXPECT_EQ(cmp.melded.losses.size(), cmp.explicit_lora.losses.size());
    EXPECT_EQ(cmp.oracle.losses.size(), cmp.melded.losses.size());
}

TEST(Compare, FullPrecisionWithAllRowsMatchesExplicit) {
    RunConfig c = parse_run_config(std::string(kSmall) + "");
    c.train.variant = ModelVariant::melded_full;
    c.train.top_k = c.train.data.out_features;
    const Comparison cmp = run_comparison(c, 1);
    ASSERT_EQ(cmp.melded.losses.size(), 20u);
    for (std::size_t i = 0; i < 20; ++i) {
        EXPECT_NEAR(cmp.melded.losses[i], cmp.explicit_lora.losses[i], 1e-8 * std::abs(cmp.explicit_lora.losses[i]));
    }
}

TEST(Compare, ThreadCountDoesNotChangeResults) {
    const RunConfig c = parse_run_config(kSmall);
    const CostParams p;
    const std::string one = comparison_csv(run_comparison(c, 1), p);
    const std::string three = comparison_csv(run_comparison(c, 3), p);
    EXPECT_EQ(one, three);
}

TEST(Compare, WorkerThreadsFromEnvironment) {
    ::setenv("FALQON_THREADS", "2", 1);
    EXPECT_EQ(worker_threads(), 2u);
    ::setenv("FALQON_THREADS", "zero", 1);
    EXPECT_THROW(worker_threads(), ConfigError);
    ::unsetenv("FALQON_THREADS");
    EXPECT_GE(worker_threads(), 1u);
}

}  // namespace
}  // namespace falqon::cli
