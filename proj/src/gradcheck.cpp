#include "zsl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "zsl/error.hpp"
#include "zsl/eval.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

std::size_t draw_dim(Rng& rng, std::size_t max_dim) { return 1 + static_cast<std::size_t>(rng.below(max_dim)); }

struct Draw {
    EmbeddingModel model;
    std::vector<SemanticInputs> class_inputs;
    GroupedBatch batch;
};

Draw draw_instance(Rng& rng, Direction direction, const GradCheckOptions& opt) {
    const ModalitySet all{ModalityId::word(), ModalityId::cartoon(), ModalityId::image(), ModalityId::text()};
    NetConfig cfg;
    for (const auto& m : all) cfg.modality_dims[m] = draw_dim(rng, opt.max_dim);
    cfg.head_hidden = draw_dim(rng, opt.max_dim);
    cfg.head_out = draw_dim(rng, opt.max_dim);
    cfg.embed_dim = draw_dim(rng, opt.max_dim);
    cfg.direction = direction;
    cfg.lambda = rng.uniform(0.0, 0.05);

    Draw d;
    d.model = init_model(cfg, rng.below(1u << 30));
    // Random biases too, so their gradients are exercised.
    for (auto& p : parameters(d.model)) {
        if (!p.is_weight) {
            for (double& v : p.values) v = rng.uniform(-0.5, 0.5);
        }
    }
    const std::size_t n_classes = draw_dim(rng, opt.max_batch);
    const std::size_t n_samples = draw_dim(rng, opt.max_batch);
    d.class_inputs.resize(n_classes);
    for (auto& in : d.class_inputs) {
        for (const auto& [m, dim] : cfg.modality_dims) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            in.emplace(m, std::move(v));
        }
    }
    for (const auto& in : d.class_inputs) d.batch.classes.push_back(&in);
    d.batch.visual.resize(static_cast<Eigen::Index>(cfg.embed_dim), static_cast<Eigen::Index>(n_samples));
    for (std::size_t s = 0; s < n_samples; ++s) {
        d.batch.sample_class.push_back(static_cast<std::size_t>(rng.below(n_classes)));
        for (Eigen::Index r = 0; r < d.batch.visual.rows(); ++r) d.batch.visual(r, static_cast<Eigen::Index>(s)) = rng.uniform(0.0, 1.0);
    }
    return d;
}

}  // namespace

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double max_gradient_error(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active,
                          double step, std::size_t* compared, std::string* worst) {
    const auto analytic = loss_and_grad(model, batch, active);
    const auto grads = parameters(analytic.grads);
    EmbeddingModel probe = model;
    auto params = parameters(probe);
    double max_err = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].values.size(); ++j) {
            double& p = params[i].values[j];
            const double saved = p;
            p = saved + step;
            const double up = loss_value(probe, batch, active);
            p = saved - step;
            const double down = loss_value(probe, batch, active);
            p = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = relative_error(grads[i].values[j], numeric);
            if (compared) ++*compared;
            if (err > max_err) {
                max_err = err;
                if (worst) *worst = params[i].name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return max_err;
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
    if (options.max_dim == 0 || options.max_batch == 0 || !(options.step > 0.0)) {
        throw ConfigError("gradcheck: dims, batch and step must be positive");
    }
    GradCheckReport report;
    Rng rng(mix_seed(options.seed, 0x9c));
    const ModalitySet all{ModalityId::word(), ModalityId::cartoon(), ModalityId::image(), ModalityId::text()};
    const auto subsets = all_subsets(all);
    for (Direction direction : {Direction::StoV, Direction::VtoS}) {
        for (std::size_t inst = 0; inst < options.instances; ++inst) {
            Draw d = draw_instance(rng, direction, options);
            // The kink margin must hold for every subset evaluated on this draw.
            auto clear_of_kinks = [&](const Draw& draw) {
                for (const auto& s : subsets) {
                    if (min_abs_preactivation(draw.model, draw.batch, s) < options.kink_margin) return false;
                }
                return true;
            };
            while (!clear_of_kinks(d)) {
                ++report.redraws;
                d = draw_instance(rng, direction, options);
            }
            ++report.instances;
            for (const auto& subset : subsets) {
                std::string worst;
                const double err = max_gradient_error(d.model, d.batch, subset, options.step, &report.parameters, &worst);
                ++report.evaluations;
                if (err > report.max_relative_error || report.worst.empty()) {
                    report.max_relative_error = std::max(report.max_relative_error, err);
                    report.worst = direction_name(direction) + " " + modality_set_name(subset) + " " + worst;
                }
            }
        }
    }
    return report;
}

}  // namespace zsl
