#include <charconv>
#include <sstream>

#include "binary_io.hpp"
#include "zsl/error.hpp"
#include "zsl/rng.hpp"
#include "zsl/trainer.hpp"

namespace zsl {

namespace {

constexpr char kMagic[] = "ZSLC";
constexpr std::uint32_t kVersion = 1;
constexpr char kCorrupted[] = "corrupted payload";

std::string config_text(const NetConfig& c) {
    std::string t;
    t += "direction=" + direction_name(c.direction) + "\n";
    t += "embed_dim=" + std::to_string(c.embed_dim) + "\n";
    t += "head_hidden=" + std::to_string(c.head_hidden) + "\n";
    t += "head_out=" + std::to_string(c.head_out) + "\n";
    t += "lambda=" + detail::format_exact(c.lambda) + "\n";
    for (const auto& [m, d] : c.modality_dims) t += "modality." + m.tag() + "=" + std::to_string(d) + "\n";
    return t;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw FormatError("corrupted payload: bad value for " + key);
    return out;
}

NetConfig parse_config_text(const std::string& text) {
    NetConfig c;
    c.modality_dims.clear();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("corrupted payload: bad config line");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "direction") {
            c.direction = parse_direction(value);
        } else if (key == "embed_dim") {
            c.embed_dim = parse_count(key, value);
        } else if (key == "head_hidden") {
            c.head_hidden = parse_count(key, value);
        } else if (key == "head_out") {
            c.head_out = parse_count(key, value);
        } else if (key == "lambda") {
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), c.lambda);
            if (ec != std::errc{} || p != value.data() + value.size()) throw FormatError("corrupted payload: bad lambda");
        } else if (key.rfind("modality.", 0) == 0) {
            c.modality_dims[ModalityId(key.substr(9))] = parse_count(key, value);
        } else {
            throw FormatError("corrupted payload: unknown config key " + key);
        }
    }
    c.validate();
    return c;
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const EmbeddingModel& model) {
    detail::ByteWriter out;
    out.bytes(std::string_view(kMagic, 4));
    out.le<std::uint32_t>(kVersion);
    const std::string cfg = config_text(model.config);
    out.le<std::uint64_t>(cfg.size());
    out.bytes(cfg);
    const auto params = parameters(model);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        out.le<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        out.bytes(p.name);
        out.le<std::uint64_t>(p.rows);
        out.le<std::uint64_t>(p.cols);
        for (double v : p.values) out.f64(v);
    }
    const std::uint64_t checksum = fnv1a(out.data());
    out.le<std::uint64_t>(checksum);
    return out.data();
}

EmbeddingModel deserialize_checkpoint(std::span<const unsigned char> bytes) {
    detail::ByteReader in(bytes, kCorrupted);
    if (bytes.size() < 4 || in.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("not a checkpoint file (bad magic)");
    const auto version = in.le<std::uint32_t>();
    if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version));
    if (bytes.size() < 8 + 8) throw FormatError(kCorrupted);
    const std::uint64_t expected = fnv1a(bytes.first(bytes.size() - 8));
    {
        detail::ByteReader tail(bytes.last(8), kCorrupted);
        if (tail.le<std::uint64_t>() != expected) throw FormatError(std::string(kCorrupted) + " (checksum mismatch)");
    }
    const auto cfg_len = in.le<std::uint64_t>();
    in.require(cfg_len);
    EmbeddingModel model = init_model(parse_config_text(in.bytes(cfg_len)), 0);
    auto params = parameters(model);
    const auto count = in.le<std::uint32_t>();
    if (count != params.size()) throw FormatError(std::string(kCorrupted) + ": parameter count does not match config");
    for (auto& p : params) {
        const auto name_len = in.le<std::uint32_t>();
        const std::string name = in.bytes(name_len);
        const auto rows = in.le<std::uint64_t>();
        const auto cols = in.le<std::uint64_t>();
        if (name != p.name || rows != p.rows || cols != p.cols) {
            throw FormatError(std::string(kCorrupted) + ": unexpected array " + name);
        }
        for (double& v : p.values) v = in.f64();
    }
    if (in.remaining() != 8) throw FormatError(std::string(kCorrupted) + ": trailing bytes");
    return model;
}

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path) {
    detail::write_file(path, serialize_checkpoint(model));
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
    return deserialize_checkpoint(detail::read_file(path));
}

}  // namespace zsl
