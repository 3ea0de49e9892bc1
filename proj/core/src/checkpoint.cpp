// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <variant>

#include "falqon/error.hpp"
#include "falqon/train.hpp"

namespace falqon {

namespace {

constexpr char kMagic[8] = {'F', 'A', 'L', 'Q', 'O', 'N', 'C', 'K'};

class Writer {
 public:
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    void matrix(const Matrix& m) {
        for (double v : m.values()) f64(v);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
    std::vector<std::uint8_t> out_;
};

class Reader {
 public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::span<const std::uint8_t> bytes(std::size_t count) {
        need(count);
        const auto s = in_.subspan(pos_, count);
        pos_ += count;
        return s;
    }
    std::uint8_t u8() { return bytes(1)[0]; }
    std::uint32_t u32() {
        const auto b = bytes(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() {
        const auto b = bytes(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        need(rows * cols * 8);
        Matrix m(rows, cols);
        for (double& v : m.values()) v = f64();
        return m;
    }
    bool done() const noexcept { return pos_ == in_.size(); }

 private:
    void need(std::size_t count) const {
        if (count > in_.size() - pos_) throw FormatError("checkpoint: truncated");
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

void check_layer_shapes(const CheckpointLayer& l) {
    const std::size_t m = l.m, n = l.n, r = l.r;
    const bool ok = l.merged.rows() == m + r && l.merged.cols() == n && l.a_full.rows() == r &&
                    l.a_full.cols() == n && l.delta_buffer.rows() == m && l.delta_buffer.cols() == r &&
                    l.moments.first.rows() == m && l.moments.first.cols() == r && l.moments.second.rows() == m &&
                    l.moments.second.cols() == r;
    if (!ok) throw ShapeError("checkpoint: layer shapes inconsistent with m, n, r");
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic});
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.layers.size()));
    for (const CheckpointLayer& l : ckpt.layers) {
        check_layer_shapes(l);
        w.u32(l.m);
        w.u32(l.n);
        w.u32(l.r);
        w.u32(l.k);
        w.f64(l.merged.scale());
        w.bytes(l.merged.codes());
        w.matrix(l.a_full);
        w.matrix(l.delta_buffer);
        w.matrix(l.moments.first);
        w.matrix(l.moments.second);
        w.u8(static_cast<std::uint8_t>(l.merged.format()));
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.bytes(sizeof kMagic);
    if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw FormatError("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointLayer l;
        l.m = r.u32();
        l.n = r.u32();
        l.r = r.u32();
        l.k = r.u32();
        if (l.m == 0 || l.n == 0 || l.r == 0 || l.k == 0 || l.k > l.m) {
            throw FormatError("checkpoint: invalid layer header");
        }
        const std::size_t m = l.m, n = l.n, rk = l.r;
        const double scale = r.f64();
        const auto codes = r.bytes((m + rk) * n);
        l.a_full = r.matrix(rk, n);
        l.delta_buffer = r.matrix(m, rk);
        l.moments.first = r.matrix(m, rk);
        l.moments.second = r.matrix(m, rk);
        const std::uint8_t tag = r.u8();
        if (tag > static_cast<std::uint8_t>(Fp8Tag::E5M2)) throw FormatError("checkpoint: unknown format tag");
        l.merged = QuantizedTensor(m + rk, n, std::vector<std::uint8_t>(codes.begin(), codes.end()), scale,
                                   static_cast<Fp8Tag>(tag));
        ckpt.layers.push_back(std::move(l));
    }
    if (!r.done()) throw FormatError("checkpoint: trailing bytes");
    return ckpt;
}

Checkpoint capture_checkpoint(const Session& session) {
    Checkpoint ckpt;
    const auto& layers = session.model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto* melded = std::get_if<MeldedLinear>(&layers[i]);
        if (melded == nullptr || melded->precision() != Precision::fp8) {
            throw StateError("checkpoint: only FP8 melded layers can be saved");
        }
        CheckpointLayer l;
        l.m = static_cast<std::uint32_t>(melded->out_features());
        l.n = static_cast<std::uint32_t>(melded->in_features());
        l.r = static_cast<std::uint32_t>(melded->rank());
        l.k = static_cast<std::uint32_t>(melded->top_k());
        l.merged = melded->merged();
        l.a_full = melded->a_full();
        l.delta_buffer = melded->delta_buffer();
        l.moments = session.optimizer.moments(i);
        ckpt.layers.push_back(std::move(l));
    }
    return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, Session& session, BufferMode buffer_mode) {
    auto& layers = session.model.layers();
    if (ckpt.layers.size() != layers.size()) throw ShapeError("checkpoint: layer count mismatch");
    if (session.optimizer.slots() != layers.size()) throw ShapeError("checkpoint: optimizer slot mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const CheckpointLayer& l = ckpt.layers[i];
        check_layer_shapes(l);
        const bool same_shape = std::visit(
            [&](const auto& layer) {
                return layer.out_features() == l.m && layer.in_features() == l.n && layer.rank() == l.r;
            },
            layers[i]);
        if (!same_shape) throw ShapeError("checkpoint: layer " + std::to_string(i) + " shape mismatch");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const CheckpointLayer& l = ckpt.layers[i];
        MeldedOptions opts;
        opts.rank = l.r;
        opts.top_k = l.k;
        opts.buffer_mode = buffer_mode;
        opts.precision = Precision::fp8;
        opts.layer_id = i;
        layers[i] = MeldedLinear::restore(l.merged, l.a_full, l.delta_buffer, opts);
        session.optimizer.set_moments(i, l.moments);
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("checkpoint: cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace falqon
