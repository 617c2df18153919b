#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "zsl/data_model.hpp"
#include "zsl/embedding_net.hpp"

namespace zsl {

struct SgdMomentum {
    double lr = 0.001;
    double momentum = 0.9;
};

struct Adam {
    double lr = 0.0001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

using OptimizerConfig = std::variant<Adam, SgdMomentum>;

struct TrainConfig {
    OptimizerConfig optimizer = Adam{};
    std::size_t batch_size = 256;
    std::size_t epochs = 200;
    double lr_decay = 1.0;  // multiplier applied after every epoch
    std::uint64_t seed = 0;
    std::optional<double> lambda;  // overrides NetConfig::lambda when set
    bool shuffle = true;

    void validate() const;
    double base_lr() const;
};

/// Moment (Adam) or velocity (SGD) buffers, one per parameter array.
struct OptimState {
    std::vector<Eigen::VectorXd> first;
    std::vector<Eigen::VectorXd> second;  // unused by SGD
    std::uint64_t step = 0;
    double lr = 0.0;
};

/// Zeroed buffers shaped like `params`, lr set from the optimizer config.
OptimState make_optim_state(const std::vector<ConstParamView>& params, const OptimizerConfig& optimizer);
OptimState make_optim_state(const EmbeddingModel& model, const OptimizerConfig& optimizer);

/// One update with the current `state.lr`. Throws DimensionError when the
/// gradient layout differs from the parameters or the state.
void optimizer_step(OptimState& state, const std::vector<ParamView>& params, const std::vector<ConstParamView>& grads,
                    const OptimizerConfig& optimizer);
void optimizer_step(OptimState& state, EmbeddingModel& model, const GradientBundle& grads,
                    const OptimizerConfig& optimizer);

struct TrainHistory {
    std::vector<double> loss;  // sample-weighted mean of batch objectives
    std::vector<double> lr;    // learning rate used during the epoch
};

struct TrainResult {
    EmbeddingModel model;
    TrainHistory history;
};

/// Adds input dims for the active modalities from the dataset tables and
/// checks that embed_dim matches the visual feature dimension. Modalities
/// already present in the config are checked against the tables.
NetConfig resolve_net_config(NetConfig config, const Dataset& dataset, const ModalitySet& active);

/// Mini-batch training on the seen classes. Fully deterministic in
/// (dataset, configs, train.seed).
TrainResult train(const Dataset& dataset, const NetConfig& net_config, const TrainConfig& train_config,
                  const ModalitySet& active);

/// Learning rate in effect during epoch `epoch`: lr0 * decay^epoch.
double scheduled_lr(double base_lr, double decay, std::size_t epoch);

// Checkpoints: "ZSLC", u32 version, length-prefixed key=value config block,
// named float64 parameter arrays, trailing FNV-1a checksum.
std::vector<unsigned char> serialize_checkpoint(const EmbeddingModel& model);
EmbeddingModel deserialize_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace zsl
