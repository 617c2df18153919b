#pragma once

#include <cstdint>
#include <string>

#include "zsl/embedding_net.hpp"

namespace zsl {

struct GradCheckOptions {
    std::size_t instances = 20;  // random (net, batch) draws per direction
    std::size_t max_dim = 8;
    std::size_t max_batch = 4;
    double step = 1e-5;
    /// Draws whose pre-activations come closer than this to a ReLU kink are
    /// redrawn; a central difference straddling a kink is meaningless.
    double kink_margin = 1e-3;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    std::size_t instances = 0;    // (net, batch, direction) draws checked
    std::size_t evaluations = 0;  // (draw, modality subset) pairs
    std::size_t parameters = 0;   // scalar derivatives compared
    std::size_t redraws = 0;
    double max_relative_error = 0.0;
    std::string worst;  // "<direction> <subset> <param>[index]"
};

/// |a - b| / max(|a|, |b|, floor). The floor keeps exact zeros (dead units)
/// from turning round-off into unbounded relative error.
double relative_error(double a, double b, double floor = 1e-3);

/// Central finite differences of the objective versus the analytic gradient
/// for random small nets, both directions and every subset of {W, C, I, T}.
GradCheckReport run_gradcheck(const GradCheckOptions& options);

/// Gradient check of one fixed (model, batch, subset).
double max_gradient_error(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active,
                          double step, std::size_t* compared = nullptr, std::string* worst = nullptr);

}  // namespace zsl
