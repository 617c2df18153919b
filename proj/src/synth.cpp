#include "zsl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zsl/error.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

// Independent streams so that changing, say, the visual noise does not
// reshuffle the split.
enum Stream : std::uint64_t { kAnchors = 1, kLift, kVisualNoise, kCoordinates, kProjection, kSemanticNoise, kSplit };

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

std::vector<ModalitySpec> SynthConfig::default_modalities() {
    return {
        {ModalityId::word(), 20, 0.5, 0.05},
        {ModalityId::cartoon(), 24, 0.5, 0.05},
        {ModalityId::image(), 18, 0.5, 0.05},
        {ModalityId::text(), 16, 0.5, 0.05},
    };
}

void SynthConfig::validate() const {
    if (n_classes == 0 || n_seen == 0 || n_seen >= n_classes) {
        throw ConfigError("synth: need 0 < n_seen < n_classes");
    }
    if (samples_per_class == 0 || latent_dim == 0 || embed_dim == 0) throw ConfigError("synth: dimensions must be positive");
    if (modalities.empty()) throw ConfigError("synth: at least one modality is required");
    if (!(visual_noise_sigma >= 0.0)) throw ConfigError("synth: visual noise must be >= 0");
    ModalitySet seen;
    for (const auto& m : modalities) {
        if (!seen.insert(m.modality).second) throw ConfigError("synth: duplicate modality " + m.modality.tag());
        if (m.dim == 0) throw ConfigError("synth: modality " + m.modality.tag() + " has dim 0");
        if (!(m.information_fraction > 0.0 && m.information_fraction <= 1.0)) {
            throw ConfigError("synth: information fraction of " + m.modality.tag() + " must lie in (0, 1]");
        }
        if (!(m.noise_sigma >= 0.0)) throw ConfigError("synth: noise of " + m.modality.tag() + " must be >= 0");
    }
}

std::vector<std::vector<std::size_t>> modality_coordinates(const SynthConfig& config) {
    config.validate();
    const std::size_t d = config.latent_dim;
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, kCoordinates));
    rng.shuffle(perm);

    std::vector<std::size_t> counts;
    std::size_t total = 0;
    for (const auto& m : config.modalities) {
        auto k = static_cast<std::size_t>(std::ceil(m.information_fraction * static_cast<double>(d) - 1e-9));
        k = std::clamp<std::size_t>(k, 1, d);
        counts.push_back(k);
        total += k;
    }
    const std::size_t n = config.modalities.size();
    std::vector<std::vector<std::size_t>> out(n);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = total <= d ? offset : (i * d) / n;
        for (std::size_t j = 0; j < counts[i]; ++j) out[i].push_back(perm[(start + j) % d]);
        std::sort(out[i].begin(), out[i].end());
        offset += counts[i];
    }
    return out;
}

Dataset generate(const SynthConfig& config) {
    config.validate();
    const auto n_classes = config.n_classes;
    const auto latent = static_cast<Eigen::Index>(config.latent_dim);
    const auto embed = static_cast<Eigen::Index>(config.embed_dim);

    Eigen::MatrixXd anchors(static_cast<Eigen::Index>(n_classes), latent);
    {
        Rng rng(mix_seed(config.seed, kAnchors));
        for (Eigen::Index c = 0; c < anchors.rows(); ++c) {
            for (Eigen::Index j = 0; j < latent; ++j) anchors(c, j) = rng.uniform();
        }
    }

    // Non-negative lift; the 1/sqrt(latent) scale keeps features O(1).
    Eigen::MatrixXd lift(embed, latent);
    {
        Rng rng(mix_seed(config.seed, kLift));
        const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
        for (Eigen::Index r = 0; r < embed; ++r) {
            for (Eigen::Index j = 0; j < latent; ++j) lift(r, j) = rng.uniform() * scale;
        }
    }

    std::vector<ClassId> order(n_classes);
    std::iota(order.begin(), order.end(), ClassId{0});
    {
        Rng rng(mix_seed(config.seed, kSplit));
        rng.shuffle(order);
    }
    ClassSet seen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.n_seen));
    ClassSet unseen(order.begin() + static_cast<std::ptrdiff_t>(config.n_seen), order.end());

    // Samples in class order; train rows for seen classes, test rows for unseen.
    std::vector<ClassId> train_labels;
    std::vector<ClassId> test_labels;
    std::vector<Eigen::VectorXd> train_rows;
    std::vector<Eigen::VectorXd> test_rows;
    {
        Rng rng(mix_seed(config.seed, kVisualNoise));
        for (ClassId c = 0; c < n_classes; ++c) {
            const Eigen::VectorXd mean = lift * anchors.row(static_cast<Eigen::Index>(c)).transpose();
            for (std::size_t s = 0; s < config.samples_per_class; ++s) {
                Eigen::VectorXd x = mean;
                for (Eigen::Index r = 0; r < embed; ++r) x[r] = std::max(0.0, x[r] + config.visual_noise_sigma * rng.normal());
                if (seen.count(c)) {
                    train_labels.push_back(c);
                    train_rows.push_back(std::move(x));
                } else {
                    test_labels.push_back(c);
                    test_rows.push_back(std::move(x));
                }
            }
        }
    }
    auto to_matrix = [&](const std::vector<Eigen::VectorXd>& rows) {
        FeatureMatrix::Storage m(static_cast<Eigen::Index>(rows.size()), embed);
        for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].cast<float>().transpose();
        return m;
    };

    const auto coords = modality_coordinates(config);
    std::vector<SemanticTable> tables;
    for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
        const auto& spec = config.modalities[mi];
        const auto& sub = coords[mi];
        const auto k = static_cast<Eigen::Index>(sub.size());
        Eigen::MatrixXd projection(static_cast<Eigen::Index>(spec.dim), k);
        Rng proj_rng(mix_seed(mix_seed(config.seed, kProjection), mi));
        const double scale = 1.0 / std::sqrt(static_cast<double>(k));
        for (Eigen::Index r = 0; r < projection.rows(); ++r) {
            for (Eigen::Index j = 0; j < k; ++j) projection(r, j) = proj_rng.normal() * scale;
        }
        Rng noise_rng(mix_seed(mix_seed(config.seed, kSemanticNoise), mi));
        std::map<ClassId, Eigen::VectorXd> vectors;
        for (ClassId c = 0; c < n_classes; ++c) {
            Eigen::VectorXd observed(k);
            for (Eigen::Index j = 0; j < k; ++j) observed[j] = anchors(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(sub[static_cast<std::size_t>(j)]));
            Eigen::VectorXd y = projection * observed;
            for (Eigen::Index r = 0; r < y.size(); ++r) y[r] = to_float(y[r] + spec.noise_sigma * noise_rng.normal());
            vectors.emplace(c, std::move(y));
        }
        tables.emplace_back(spec.modality, std::move(vectors));
    }

    return make_dataset(FeatureMatrix(to_matrix(train_rows), std::move(train_labels)),
                        FeatureMatrix(to_matrix(test_rows), std::move(test_labels)), std::move(tables), std::move(seen),
                        std::move(unseen));
}

}  // namespace zsl
