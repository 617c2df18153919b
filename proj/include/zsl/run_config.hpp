#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zsl/embedding_net.hpp"
#include "zsl/eval.hpp"
#include "zsl/metric.hpp"
#include "zsl/synth.hpp"
#include "zsl/trainer.hpp"

namespace zsl {

/// Flat `section.key = value` configuration. Lines starting with '#' are
/// comments. Unknown keys are rejected on every write.
class RunConfig {
public:
    static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Every accepted key with a one-line description.
    static const std::map<std::string, std::string>& known_keys();

    void set(const std::string& key, const std::string& value);
    /// "key=value" form used by --set.
    void set_assignment(const std::string& assignment);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    std::uint64_t seed() const { return get_uint("seed", 0); }

    /// embed_dim falls back to `visual_dim` when net.embed_dim is unset.
    NetConfig net_config(std::optional<std::size_t> visual_dim = std::nullopt) const;
    TrainConfig train_config() const;
    SynthConfig synth_config() const;
    MetricKind metric() const;
    AblationGrid ablation_grid(const ModalitySet& available) const;
    DatasetLoadOptions load_options() const;

private:
    std::map<std::string, std::string> values_;
};

/// Parses "W:20:0.5:0.05,C:24:0.5:0.05" (tag:dim:fraction:noise).
std::vector<ModalitySpec> parse_modality_specs(const std::string& text);

}  // namespace zsl
