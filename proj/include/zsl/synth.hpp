#pragma once

#include <cstdint>
#include <vector>

#include "zsl/data_model.hpp"

namespace zsl {

struct ModalitySpec {
    ModalityId modality;
    std::size_t dim = 0;
    double information_fraction = 1.0;  // share of latent coordinates observed
    double noise_sigma = 0.0;
};

struct SynthConfig {
    std::size_t n_classes = 24;
    std::size_t n_seen = 18;
    std::size_t samples_per_class = 30;
    std::size_t latent_dim = 16;
    std::size_t embed_dim = 64;
    std::vector<ModalitySpec> modalities = default_modalities();
    double visual_noise_sigma = 0.05;
    std::uint64_t seed = 0;

    /// W, C, I, T with half of the latent coordinates each and noise 0.05.
    static std::vector<ModalitySpec> default_modalities();

    void validate() const;
};

/// Latent coordinates observed by each modality, in modality order. Windows
/// over a seeded permutation: disjoint when the fractions allow it, evenly
/// staggered otherwise.
std::vector<std::vector<std::size_t>> modality_coordinates(const SynthConfig& config);

/// Deterministic multi-modal zero-shot dataset:
///  - one anchor per class, uniform in [0,1]^latent_dim;
///  - visual rows = fixed non-negative lift of the anchor plus Gaussian
///    noise, clipped at zero;
///  - modality vectors = random projection of that modality's coordinate
///    subset plus Gaussian noise;
///  - seen/unseen split by seeded shuffle.
/// All stored values are float32-representable so file round trips are exact.
Dataset generate(const SynthConfig& config);

}  // namespace zsl
