#include "zsl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "zsl/error.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

RowMatrix class_rows(const EmbeddingModel& model, const std::vector<SemanticTable>& semantics, const ClassSet& classes,
                     const ModalitySet& active, bool fused) {
    check_active(model, active);
    const auto dim = static_cast<Eigen::Index>(fused ? model.config.head_out : model.config.embed_dim);
    RowMatrix out(static_cast<Eigen::Index>(classes.size()), dim);
    Eigen::Index r = 0;
    for (ClassId c : classes) {
        SemanticInputs inputs;
        for (const auto& m : active) {
            auto table = std::find_if(semantics.begin(), semantics.end(),
                                      [&](const SemanticTable& t) { return t.modality() == m; });
            if (table == semantics.end()) throw InvariantError("no semantic table for modality " + m.tag());
            if (!table->covers(c)) {
                throw InvariantError("class " + std::to_string(c) + " missing from modality " + m.tag());
            }
            inputs.emplace(m, table->at(c));
        }
        auto f = forward(model, inputs, active);
        out.row(r++) = (fused ? f.fused : f.embedded).transpose();
    }
    return out;
}

std::string subset_key(const ModalitySet& s) { return modality_set_name(s); }

}  // namespace

RowMatrix embed_class_prototypes(const EmbeddingModel& model, const std::vector<SemanticTable>& semantics,
                                 const ClassSet& classes, const ModalitySet& active) {
    return class_rows(model, semantics, classes, active, false);
}

RowMatrix class_representations(const EmbeddingModel& model, const std::vector<SemanticTable>& semantics,
                                 const ClassSet& classes, const ModalitySet& active) {
    return class_rows(model, semantics, classes, active, model.config.direction == Direction::VtoS);
}

RowMatrix query_representations(const EmbeddingModel& model, const FeatureMatrix& features) {
    if (features.dim() != model.config.embed_dim) {
        throw DimensionError("test feature dim " + std::to_string(features.dim()) + " does not match model embed_dim " +
                             std::to_string(model.config.embed_dim));
    }
    if (model.config.direction == Direction::StoV) return features.as_double();
    RowMatrix out(static_cast<Eigen::Index>(features.rows()), static_cast<Eigen::Index>(model.config.head_out));
    for (std::size_t i = 0; i < features.rows(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = map_visual(model.visual_map, features.row(i)).transpose();
    }
    return out;
}

RowMatrix test_distance_matrix(const EmbeddingModel& model, const Dataset& dataset, const MetricKind& metric,
                               const ModalitySet& active) {
    RowMatrix queries = query_representations(model, dataset.test_visual());
    RowMatrix protos = class_representations(model, dataset.semantics(), dataset.unseen_classes(), active);
    return pairwise_distances(queries, protos, metric);
}

EvalResult score_distances(const RowMatrix& dist, const std::vector<ClassId>& true_labels,
                           const std::vector<ClassId>& classes) {
    if (static_cast<std::size_t>(dist.rows()) != true_labels.size() ||
        static_cast<std::size_t>(dist.cols()) != classes.size()) {
        throw DimensionError("distance matrix shape does not match labels and classes");
    }
    if (classes.empty()) throw InvariantError("no candidate classes");
    EvalResult r;
    r.classes = classes;
    const std::size_t n_classes = classes.size();
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    std::map<ClassId, std::size_t> index;
    for (std::size_t i = 0; i < n_classes; ++i) index[classes[i]] = i;
    std::vector<std::size_t> hits(n_classes, 0);
    std::vector<std::size_t> counts(n_classes, 0);
    std::size_t top1 = 0;
    std::size_t top5 = 0;
    const std::size_t k = std::min<std::size_t>(5, n_classes);
    for (Eigen::Index q = 0; q < dist.rows(); ++q) {
        auto it = index.find(true_labels[static_cast<std::size_t>(q)]);
        if (it == index.end()) {
            throw InvariantError("test label " + std::to_string(true_labels[static_cast<std::size_t>(q)]) +
                                 " is not a candidate class");
        }
        const std::size_t truth = it->second;
        auto ranked = rank_classes({dist.data() + q * dist.cols(), n_classes}, k);
        ++counts[truth];
        ++r.confusion[truth][ranked[0]];
        if (ranked[0] == truth) {
            ++top1;
            ++hits[truth];
        }
        if (std::find(ranked.begin(), ranked.end(), truth) != ranked.end()) ++top5;
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(dist.rows(), 1));
    r.top1 = static_cast<double>(top1) / n;
    r.top5 = static_cast<double>(top5) / n;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (counts[c] > 0) r.per_class_top1[classes[c]] = static_cast<double>(hits[c]) / static_cast<double>(counts[c]);
    }
    return r;
}

EvalResult evaluate(const EmbeddingModel& model, const Dataset& dataset, const MetricKind& metric,
                    const ModalitySet& active) {
    RowMatrix dist = test_distance_matrix(model, dataset, metric, active);
    const auto& unseen = dataset.unseen_classes();
    return score_distances(dist, dataset.test_visual().labels(), {unseen.begin(), unseen.end()});
}

double hubness_skewness(const RowMatrix& dist, std::size_t k) {
    const auto n_classes = static_cast<std::size_t>(dist.cols());
    if (n_classes < 2) throw InvariantError("hubness skewness needs at least 2 classes");
    if (k == 0 || k > n_classes) throw InvariantError("hubness skewness: k must lie in [1, classes]");
    std::vector<double> occurrences(n_classes, 0.0);
    for (Eigen::Index q = 0; q < dist.rows(); ++q) {
        for (std::size_t c : rank_classes({dist.data() + q * dist.cols(), n_classes}, k)) occurrences[c] += 1.0;
    }
    double mean = 0.0;
    for (double v : occurrences) mean += v;
    mean /= static_cast<double>(n_classes);
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : occurrences) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(n_classes);
    m3 /= static_cast<double>(n_classes);
    if (m2 == 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

std::vector<ModalitySet> all_subsets(const ModalitySet& modalities) {
    std::vector<ModalityId> items(modalities.begin(), modalities.end());
    if (items.size() > 16) throw ConfigError("too many modalities for a full subset grid");
    std::vector<ModalitySet> out;
    for (std::uint32_t mask = 1; mask < (1u << items.size()); ++mask) {
        ModalitySet s;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (mask & (1u << i)) s.insert(items[i]);
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const ModalitySet& a, const ModalitySet& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

std::uint64_t cell_seed(std::uint64_t base_seed, const ModalitySet& subset, Direction direction) {
    const std::string key = subset_key(subset);
    const std::uint64_t h = fnv1a({reinterpret_cast<const unsigned char*>(key.data()), key.size()});
    return mix_seed(mix_seed(base_seed, h), direction == Direction::StoV ? 0 : 1);
}

bool cell_order(const AblationCell& a, const AblationCell& b) {
    if (a.modalities.size() != b.modalities.size()) return a.modalities.size() < b.modalities.size();
    if (a.modalities != b.modalities) return a.modalities < b.modalities;
    if (a.direction != b.direction) return a.direction < b.direction;
    if (a.metric.kind != b.metric.kind) return a.metric.kind > b.metric.kind;  // EC columns first
    return a.metric.eta < b.metric.eta;
}

std::vector<AblationCell> ablate(const Dataset& dataset, const NetConfig& net_config, const TrainConfig& train_config,
                                 const AblationGrid& grid) {
    if (grid.subsets.empty() || grid.directions.empty() || grid.metrics.empty()) {
        throw ConfigError("ablation grid needs at least one subset, direction and metric");
    }
    for (const auto& s : grid.subsets) {
        if (s.empty()) throw ConfigError("ablation subset must be non-empty");
    }
    struct Task {
        ModalitySet subset;
        Direction direction;
    };
    std::vector<Task> tasks;
    for (const auto& s : grid.subsets) {
        for (Direction d : grid.directions) tasks.push_back({s, d});
    }
    std::vector<std::vector<AblationCell>> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                const Task& task = tasks[t];
                NetConfig net = net_config;
                net.direction = task.direction;
                TrainConfig tc = train_config;
                tc.seed = cell_seed(train_config.seed, task.subset, task.direction);
                auto trained = train(dataset, net, tc, task.subset);
                for (const auto& metric : grid.metrics) {
                    AblationCell cell;
                    cell.modalities = task.subset;
                    cell.direction = task.direction;
                    cell.metric = metric;
                    RowMatrix dist = test_distance_matrix(trained.model, dataset, metric, task.subset);
                    const auto& unseen = dataset.unseen_classes();
                    cell.result = score_distances(dist, dataset.test_visual().labels(), {unseen.begin(), unseen.end()});
                    cell.hubness = unseen.size() >= 2 ? hubness_skewness(dist, std::min(grid.hubness_k, unseen.size())) : 0.0;
                    results[t].push_back(std::move(cell));
                }
                spdlog::debug("ablate {} {} done", modality_set_name(task.subset), direction_name(task.direction));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(grid.jobs, tasks.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<AblationCell> cells;
    for (auto& r : results) {
        for (auto& c : r) cells.push_back(std::move(c));
    }
    std::stable_sort(cells.begin(), cells.end(), cell_order);
    return cells;
}

}  // namespace zsl
