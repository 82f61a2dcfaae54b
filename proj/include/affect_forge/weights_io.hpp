#pragma once

// Weights container, all integers little-endian:
//
//   "AFWT"                      magic
//   u32  version (1)
//   u8[32] config fingerprint    SHA-256 of ModelConfig::canonical()
//   u8[32] palette fingerprint   SHA-256 of TilePalette::canonical_text()
//   u32 n, n bytes               config canonical text
//   u32 n, n bytes               metric name
//   u64                          training seed
//   u32                          tensor count, then per tensor:
//       u32 n, n bytes name; u32 rank; u64 dims[rank]; f64 data[product(dims)]
//   u8[32]                      SHA-256 of every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "affect_forge/digest.hpp"
#include "affect_forge/error.hpp"
#include "affect_forge/model.hpp"
#include "affect_forge/text_io.hpp"

namespace affect_forge {

static_assert(std::endian::native == std::endian::little, "weights I/O assumes a little-endian host");

inline constexpr char kWeightsMagic[4] = {'A', 'F', 'W', 'T'};
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void pod(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out_.append(buf, sizeof(T));
    }
    void bytes(std::string_view s) { out_.append(s); }
    void digest(const Digest& d) { out_.append(reinterpret_cast<const char*>(d.data()), d.size()); }
    void str(std::string_view s) {
        pod(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    std::string& buffer() { return out_; }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view in) : in_(in) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Digest digest() {
        Digest d;
        std::memcpy(d.data(), bytes(d.size()).data(), d.size());
        return d;
    }
    std::string str() { return std::string(bytes(pod<std::uint32_t>())); }
    bool done() const noexcept { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw ChecksumError("weights file truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::string encode_weights(const ModelWeights& w) {
    detail::ByteWriter out;
    out.bytes(std::string_view(kWeightsMagic, 4));
    out.pod(kWeightsVersion);
    out.digest(w.config.fingerprint());
    out.digest(w.palette_fingerprint);
    out.str(w.config.canonical());
    out.str(w.config.metric);
    out.pod(static_cast<std::uint64_t>(w.seed));
    out.pod(static_cast<std::uint32_t>(w.params.size()));
    for (const Parameter& p : w.params) {
        out.str(p.name);
        out.pod(static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t d : p.value.shape()) out.pod(static_cast<std::uint64_t>(d));
        for (double v : p.value.data()) out.pod(v);
    }
    out.digest(sha256(out.buffer()));
    return std::move(out.buffer());
}

struct WeightsExpectation {
    std::optional<Digest> config_fingerprint;
    std::optional<Digest> palette_fingerprint;
};

inline ModelWeights decode_weights(std::string_view bytes, const WeightsExpectation& expect = {}) {
    if (bytes.size() < 4 + 32 || bytes.substr(0, 4) != std::string_view(kWeightsMagic, 4))
        throw ChecksumError("not a weights file (bad magic or truncated)");
    const std::string_view body = bytes.substr(0, bytes.size() - 32);
    Digest stored;
    std::memcpy(stored.data(), bytes.data() + body.size(), 32);
    if (sha256(body) != stored) throw ChecksumError("weights file checksum mismatch (corrupt or truncated)");

    detail::ByteReader in(body);
    in.bytes(4);
    if (const auto version = in.pod<std::uint32_t>(); version != kWeightsVersion)
        throw IncompatibleError("unsupported weights version " + std::to_string(version));
    const Digest config_fp = in.digest();
    ModelWeights w;
    w.palette_fingerprint = in.digest();
    w.config = ModelConfig::from_canonical(in.str());
    if (w.config.fingerprint() != config_fp) throw ChecksumError("stored config text does not match its fingerprint");
    if (expect.config_fingerprint && *expect.config_fingerprint != config_fp)
        throw IncompatibleError("weights were trained with a different model configuration (" + to_hex(config_fp) +
                                " vs expected " + to_hex(*expect.config_fingerprint) + ")");
    if (expect.palette_fingerprint && *expect.palette_fingerprint != w.palette_fingerprint)
        throw IncompatibleError("weights were trained with a different tile palette (" +
                                to_hex(w.palette_fingerprint) + " vs expected " + to_hex(*expect.palette_fingerprint) +
                                ")");
    w.config.metric = in.str();
    w.seed = in.pod<std::uint64_t>();
    const auto count = in.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = in.str();
        const auto rank = in.pod<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(in.pod<std::uint64_t>());
        std::vector<double> data(element_count(shape));
        for (double& v : data) v = in.pod<double>();
        w.params.add(name, Tensor(std::move(shape), std::move(data)));
    }
    if (!in.done()) throw ChecksumError("trailing bytes in weights file");
    AffectModel(w.config).check_parameters(w.params);
    return w;
}

inline void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
    write_file_atomic(path, encode_weights(w));
}

inline ModelWeights load_weights(const std::filesystem::path& path, const WeightsExpectation& expect = {}) {
    return decode_weights(read_file(path), expect);
}

} // namespace affect_forge
