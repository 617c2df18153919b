#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zsl/data_model.hpp"

namespace zsl {

/// S->V embeds semantics into the visual space; V->S maps visual features
/// into the fused semantic space.
enum class Direction { StoV, VtoS };

/// "s2v" / "v2s".
std::string direction_name(Direction d);
/// "S->V" / "V->S", as printed in reports.
std::string direction_label(Direction d);
Direction parse_direction(const std::string& text);

struct NetConfig {
    std::map<ModalityId, std::size_t> modality_dims;
    std::size_t head_hidden = 512;
    std::size_t head_out = 1024;
    std::size_t embed_dim = 2048;
    Direction direction = Direction::StoV;
    double lambda = 0.0005;

    /// Throws ConfigError when a dimension is zero or lambda is negative.
    void validate() const;

    bool operator==(const NetConfig&) const = default;
};

/// Affine map followed by ReLU.
struct Dense {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;

    std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

/// Two FC+ReLU layers turning one modality's vector into a fusion summand.
struct FusionHead {
    Dense hidden;  // in -> head_hidden
    Dense out;     // head_hidden -> head_out
};

/// Semantic branch: one head per modality, element-wise sum, then the shared
/// FC+ReLU projection into the embedding space.
struct FusionNet {
    std::map<ModalityId, FusionHead> heads;
    Dense projection;  // head_out -> embed_dim
};

/// Visual-to-semantic mapper used in the V->S direction:
/// embed_dim -> head_out -> head_hidden -> head_out. Empty for S->V models.
struct VisualMapNet {
    std::array<Dense, 3> layers;

    bool empty() const { return layers[0].weight.size() == 0; }
};

struct EmbeddingModel {
    NetConfig config;
    FusionNet fusion;
    VisualMapNet visual_map;
};

/// Gradients with exactly the parameter layout of the owning model.
struct GradientBundle {
    FusionNet fusion;
    VisualMapNet visual_map;

    static GradientBundle zeros_like(const EmbeddingModel& model);
};

/// Mutable view of one parameter array (column-major storage).
struct ParamView {
    std::string name;
    std::span<double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool is_weight = false;
};

struct ConstParamView {
    std::string name;
    std::span<const double> values;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool is_weight = false;
};

/// Every parameter array in canonical order: heads (by modality), projection,
/// then the visual map layers when present. Gradient bundles list the same
/// names in the same order.
std::vector<ParamView> parameters(EmbeddingModel& model);
std::vector<ConstParamView> parameters(const EmbeddingModel& model);
std::vector<ParamView> parameters(GradientBundle& grads);
std::vector<ConstParamView> parameters(const GradientBundle& grads);

/// Glorot-uniform weights, zero biases. Deterministic in (config, seed).
EmbeddingModel init_model(const NetConfig& config, std::uint64_t seed);

using SemanticInputs = std::map<ModalityId, Eigen::VectorXd>;

struct ForwardOutput {
    Eigen::VectorXd embedded;  // embed_dim
    Eigen::VectorXd fused;     // head_out
};

/// Runs the active heads, sums their outputs, then projects. Inactive heads
/// are skipped entirely.
ForwardOutput forward(const EmbeddingModel& model, const SemanticInputs& inputs, const ModalitySet& active);

/// Three FC+ReLU layers applied to a visual feature (V->S models only).
Eigen::VectorXd map_visual(const VisualMapNet& net, const Eigen::VectorXd& x);

/// One training pair: the semantic inputs of the sample's class and its
/// visual feature.
struct TrainPair {
    SemanticInputs semantics;
    Eigen::VectorXd visual;
};

/// Batch in which samples share per-class semantic inputs. Each distinct
/// class is pushed through the semantic branch once.
struct GroupedBatch {
    std::vector<const SemanticInputs*> classes;
    std::vector<std::size_t> sample_class;  // per sample, index into classes
    Eigen::MatrixXd visual;                 // embed_dim x samples

    std::size_t size() const { return sample_class.size(); }
};

struct LossAndGrad {
    double loss = 0.0;       // data term + regularizer
    double data_loss = 0.0;  // mean squared residual
    GradientBundle grads;
};

/// Mean squared residual plus lambda times the squared Frobenius norm of
/// every weight matrix that takes part in the objective. S->V residuals are
/// visual - embedded(class); V->S residuals are map_visual(visual) - fused(class).
LossAndGrad loss_and_grad(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active);
LossAndGrad loss_and_grad(const EmbeddingModel& model, std::span<const TrainPair> batch, const ModalitySet& active);

/// Objective value only; skips the backward pass.
double loss_value(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active);

/// Smallest |pre-activation| over every ReLU the batch passes through.
/// Finite-difference checks use it to stay clear of ReLU kinks.
double min_abs_preactivation(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active);

/// Throws unless `active` is a non-empty subset of the configured modalities.
void check_active(const EmbeddingModel& model, const ModalitySet& active);

}  // namespace zsl
