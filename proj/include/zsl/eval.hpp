#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "zsl/data_model.hpp"
#include "zsl/embedding_net.hpp"
#include "zsl/metric.hpp"
#include "zsl/trainer.hpp"

namespace zsl {

struct EvalResult {
    double top1 = 0.0;
    double top5 = 0.0;
    std::vector<ClassId> classes;  // candidate classes, ascending; indexes the confusion matrix
    std::map<ClassId, double> per_class_top1;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

    bool operator==(const EvalResult&) const = default;
};

/// Embedded semantic vector (S->V space) of every class, one row per class
/// in ascending id order.
RowMatrix embed_class_prototypes(const EmbeddingModel& model, const std::vector<SemanticTable>& semantics,
                                 const ClassSet& classes, const ModalitySet& active);

/// Class vectors in the model's comparison space: embedded vectors for S->V,
/// fused vectors for V->S.
RowMatrix class_representations(const EmbeddingModel& model, const std::vector<SemanticTable>& semantics,
                                 const ClassSet& classes, const ModalitySet& active);

/// Test features in the comparison space: unchanged for S->V, mapped through
/// the visual map for V->S.
RowMatrix query_representations(const EmbeddingModel& model, const FeatureMatrix& features);

/// Test samples x unseen classes (ascending id).
RowMatrix test_distance_matrix(const EmbeddingModel& model, const Dataset& dataset, const MetricKind& metric,
                               const ModalitySet& active);

/// Scores a distance matrix: arg-min per row, Top-1/Top-5, per-class Top-1
/// and the confusion matrix. Top-5 degrades to Top-|classes| for fewer than
/// five candidates.
EvalResult score_distances(const RowMatrix& dist, const std::vector<ClassId>& true_labels,
                           const std::vector<ClassId>& classes);

/// Zero-shot evaluation over the unseen classes; the direction comes from
/// the model's config.
EvalResult evaluate(const EmbeddingModel& model, const Dataset& dataset, const MetricKind& metric,
                    const ModalitySet& active);

/// Skewness of the k-occurrence distribution N_k(c) over columns, using
/// population moments. Returns 0 when every class occurs equally often.
double hubness_skewness(const RowMatrix& dist, std::size_t k);

struct AblationCell {
    ModalitySet modalities;
    Direction direction = Direction::StoV;
    MetricKind metric;
    EvalResult result;
    double hubness = 0.0;  // k-occurrence skewness of the test distance matrix
};

struct AblationGrid {
    std::vector<ModalitySet> subsets;
    std::vector<Direction> directions;
    std::vector<MetricKind> metrics;
    std::size_t jobs = 1;
    std::size_t hubness_k = 1;
};

/// Every non-empty subset of `modalities`, smallest first.
std::vector<ModalitySet> all_subsets(const ModalitySet& modalities);

/// Training seed of one grid cell, derived from the base seed, the subset and
/// the direction.
std::uint64_t cell_seed(std::uint64_t base_seed, const ModalitySet& subset, Direction direction);

/// Report order: subsets by size then tags, then direction, then metric.
bool cell_order(const AblationCell& a, const AblationCell& b);

/// Trains one model per (subset, direction) and evaluates it under every
/// metric. Cells come back in report order regardless of `jobs`.
std::vector<AblationCell> ablate(const Dataset& dataset, const NetConfig& net_config, const TrainConfig& train_config,
                                 const AblationGrid& grid);

}  // namespace zsl
