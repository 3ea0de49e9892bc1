// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <optional>
#include <variant>

#include "falqon/checkpoint.hpp"
#include "falqon/error.hpp"
#include "falqon/train.hpp"

namespace falqon {
namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.seed = 11;
    c.steps = 24;
    c.rank = 4;
    c.top_k = 3;
    c.optimizer.lr = 0.05;
    c.hidden = {10};
    c.activation = Activation::gelu;
    c.data.in_features = 12;
    c.data.out_features = 8;
    c.data.train_samples = 128;
    c.data.eval_samples = 32;
    c.data.weight_std = 0.05;
    return c;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

class CheckpointTest : public ::testing::Test {
 protected:
    void SetUp() override {
        config = small_config();
        data = synthetic_dataset(config.data, config.seed);
        TrainConfig partial = config;
        partial.steps = 10;
        session.emplace(make_session(config, data));
        train(*session, partial, data);
    }

    TrainConfig config;
    Dataset data;
    std::optional<Session> session;
};

TEST_F(CheckpointTest, HeaderAndLayoutAreFixed) {
    const Checkpoint ck = capture_checkpoint(*session);
    const std::vector<std::uint8_t> bytes = encode_checkpoint(ck);
    ASSERT_GE(bytes.size(), 16u);
    EXPECT_EQ(std::memcmp(bytes.data(), "FALQONCK", 8), 0);
    EXPECT_EQ(read_u32(bytes, 8), 1u);
    EXPECT_EQ(read_u32(bytes, 12), 2u);
    // Layer 0: W is 10 x 12, r = 4, k = 3.
    EXPECT_EQ(read_u32(bytes, 16), 10u);
    EXPECT_EQ(read_u32(bytes, 20), 12u);
    EXPECT_EQ(read_u32(bytes, 24), 4u);
    EXPECT_EQ(read_u32(bytes, 28), 3u);
    std::uint64_t scale_bits = 0;
    for (int i = 0; i < 8; ++i) scale_bits |= static_cast<std::uint64_t>(bytes[32 + i]) << (8 * i);
    EXPECT_EQ(std::bit_cast<double>(scale_bits), ck.layers[0].merged.scale());
    std::size_t expected = 16;
    for (const auto& l : ck.layers) {
        expected += 16 + 8 + (l.m + l.r) * l.n + 8 * (l.r * l.n + 3 * l.m * l.r) + 1;
    }
    EXPECT_EQ(bytes.size(), expected);
    EXPECT_EQ(bytes.back(), 0u);  // E4M3 tag
}

TEST_F(CheckpointTest, SaveLoadSaveIsByteIdentical) {
    const auto dir = std::filesystem::temp_directory_path() / "falqon_ckpt_test";
    std::filesystem::create_directories(dir);
    const Checkpoint ck = capture_checkpoint(*session);
    save_checkpoint(dir / "a.bin", ck);
    const Checkpoint loaded = load_checkpoint(dir / "a.bin");
    EXPECT_EQ(loaded, ck);
    save_checkpoint(dir / "b.bin", loaded);
    EXPECT_EQ(encode_checkpoint(load_checkpoint(dir / "b.bin")), encode_checkpoint(ck));
    std::filesystem::remove_all(dir);
}

TEST_F(CheckpointTest, ResumedRunMatchesUninterruptedRun) {
    Session whole = make_session(config, data);
    const RunReport full = train(whole, config, data);

    const std::vector<std::uint8_t> bytes = encode_checkpoint(capture_checkpoint(*session));
    Session resumed = make_session(config, data);
    restore_checkpoint(decode_checkpoint(bytes), resumed, config.buffer_mode);
    TrainConfig rest = config;
    rest.start_step = 10;
    const RunReport tail = train(resumed, rest, data);

    ASSERT_EQ(tail.losses.size(), 14u);
    for (std::size_t i = 0; i < tail.losses.size(); ++i) EXPECT_EQ(tail.losses[i], full.losses[10 + i]);
    EXPECT_EQ(encode_checkpoint(capture_checkpoint(resumed)), encode_checkpoint(capture_checkpoint(whole)));
    EXPECT_EQ(tail.eval.final_loss, full.eval.final_loss);
}

TEST_F(CheckpointTest, RestoredModelInfersIdentically) {
    Session fresh = make_session(config, data);
    restore_checkpoint(capture_checkpoint(*session), fresh, config.buffer_mode);
    EXPECT_EQ(fresh.model.infer(data.eval_x), session->model.infer(data.eval_x));
}

TEST_F(CheckpointTest, CorruptInputsAreRejected) {
    const std::vector<std::uint8_t> good = encode_checkpoint(capture_checkpoint(*session));
    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = good;
    bad[8] = 2;
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = good;
    bad.pop_back();
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = good;
    bad.push_back(0);
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = good;
    bad.back() = 7;
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    bad = good;
    bad[28] = 200;  // k > m
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
    EXPECT_THROW(load_checkpoint("/nonexistent/falqon.ckpt"), FormatError);
}

TEST_F(CheckpointTest, MismatchedSessionIsRejected) {
    TrainConfig other = config;
    other.hidden = {9};
    Session s = make_session(other, data);
    EXPECT_THROW(restore_checkpoint(capture_checkpoint(*session), s, config.buffer_mode), ShapeError);
}

TEST(Checkpoint, OnlyFp8MeldedSessionsCanBeCaptured) {
    TrainConfig c = small_config();
    c.variant = ModelVariant::explicit_fp8;
    const Dataset d = synthetic_dataset(c.data, c.seed);
    EXPECT_THROW(capture_checkpoint(make_session(c, d)), StateError);
    c.variant = ModelVariant::melded_full;
    EXPECT_THROW(capture_checkpoint(make_session(c, d)), StateError);
}

TEST(Checkpoint, IdenticalRunsGiveIdenticalBytes) {
    const TrainConfig c = small_config();
    const Dataset d = synthetic_dataset(c.data, c.seed);
    Session a = make_session(c, d);
    Session b = make_session(c, d);
    train(a, c, d);
    train(b, c, d);
    EXPECT_EQ(encode_checkpoint(capture_checkpoint(a)), encode_checkpoint(capture_checkpoint(b)));
}

}  // namespace
}  // namespace falqon
