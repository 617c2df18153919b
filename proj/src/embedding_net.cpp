#include "zsl/embedding_net.hpp"

#include <cmath>
#include <limits>

#include "zsl/error.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

// Subgradient 0 at exactly 0.
Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) { return (z.array() > 0.0).cast<double>().matrix(); }

Eigen::MatrixXd affine(const Dense& layer, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    return z;
}

// Activations of one Dense layer kept for the backward pass.
struct LayerTrace {
    const Eigen::MatrixXd* input = nullptr;
    Eigen::MatrixXd pre;
    Eigen::MatrixXd out;
};

LayerTrace run_layer(const Dense& layer, const Eigen::MatrixXd& x) {
    LayerTrace t;
    t.input = &x;
    t.pre = affine(layer, x);
    t.out = relu(t.pre);
    return t;
}

// Backpropagates d(out) through ReLU and the affine map; returns d(input).
Eigen::MatrixXd backprop_layer(const Dense& layer, const LayerTrace& trace, const Eigen::MatrixXd& d_out, Dense& grad,
                               bool want_input_grad = true) {
    Eigen::MatrixXd d_pre = d_out.cwiseProduct(relu_mask(trace.pre));
    grad.weight.noalias() += d_pre * trace.input->transpose();
    grad.bias += d_pre.rowwise().sum();
    if (!want_input_grad) return {};
    return layer.weight.transpose() * d_pre;
}

Dense zero_like(const Dense& d) {
    return {Eigen::MatrixXd::Zero(d.weight.rows(), d.weight.cols()), Eigen::VectorXd::Zero(d.bias.size())};
}

Dense glorot(std::size_t in, std::size_t out, Rng& rng) {
    Dense d;
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    d.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    // Row-major draw order, fixed regardless of Eigen's storage order.
    for (Eigen::Index r = 0; r < d.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = rng.uniform(-s, s);
    }
    d.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    return d;
}

template <typename View, typename Fusion, typename Visual>
std::vector<View> collect(Fusion& fusion, Visual& visual) {
    std::vector<View> out;
    auto push = [&](const std::string& name, auto& dense) {
        if (dense.weight.size() == 0) return;
        out.push_back(View{name + ".weight", {dense.weight.data(), static_cast<std::size_t>(dense.weight.size())},
                           static_cast<std::size_t>(dense.weight.rows()), static_cast<std::size_t>(dense.weight.cols()), true});
        out.push_back(View{name + ".bias", {dense.bias.data(), static_cast<std::size_t>(dense.bias.size())},
                           static_cast<std::size_t>(dense.bias.size()), 1, false});
    };
    for (auto& [tag, head] : fusion.heads) {
        push("head." + tag.tag() + ".hidden", head.hidden);
        push("head." + tag.tag() + ".out", head.out);
    }
    push("projection", fusion.projection);
    for (std::size_t i = 0; i < visual.layers.size(); ++i) push("visual." + std::to_string(i), visual.layers[i]);
    return out;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& index) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t i = 0; i < index.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(index[i]));
    return out;
}

Eigen::MatrixXd scatter_sum_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& index, std::size_t n) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < index.size(); ++i) out.col(static_cast<Eigen::Index>(index[i])) += m.col(static_cast<Eigen::Index>(i));
    return out;
}

struct HeadTrace {
    Eigen::MatrixXd input;
    LayerTrace hidden;
    LayerTrace out;
};

struct VisualTrace {
    std::array<LayerTrace, 3> layers;
};

void check_batch(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active) {
    check_active(model, active);
    if (batch.size() == 0) throw InvariantError("empty batch");
    if (static_cast<std::size_t>(batch.visual.cols()) != batch.size()) {
        throw DimensionError("batch has " + std::to_string(batch.size()) + " samples but " +
                             std::to_string(batch.visual.cols()) + " visual columns");
    }
    if (static_cast<std::size_t>(batch.visual.rows()) != model.config.embed_dim) {
        throw DimensionError("target dim " + std::to_string(batch.visual.rows()) + " does not match embed_dim " +
                             std::to_string(model.config.embed_dim));
    }
    for (std::size_t c : batch.sample_class) {
        if (c >= batch.classes.size()) throw InvariantError("batch sample refers to missing class slot");
    }
    if (model.config.direction == Direction::VtoS && model.visual_map.empty()) {
        throw InvariantError("V->S model has no visual map");
    }
}

// Stacks the inputs of one modality across the batch's classes.
Eigen::MatrixXd stack_inputs(const GroupedBatch& batch, const ModalityId& m, std::size_t dim) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(batch.classes.size()));
    for (std::size_t c = 0; c < batch.classes.size(); ++c) {
        auto it = batch.classes[c]->find(m);
        if (it == batch.classes[c]->end()) throw InvariantError("missing input for modality " + m.tag());
        if (static_cast<std::size_t>(it->second.size()) != dim) {
            throw DimensionError("modality " + m.tag() + " input has dim " + std::to_string(it->second.size()) +
                                 ", expected " + std::to_string(dim));
        }
        y.col(static_cast<Eigen::Index>(c)) = it->second;
    }
    return y;
}

double regularizer(const EmbeddingModel& model, const ModalitySet& active) {
    double r = 0.0;
    for (const auto& m : active) {
        const auto& head = model.fusion.heads.at(m);
        r += head.hidden.weight.squaredNorm() + head.out.weight.squaredNorm();
    }
    if (model.config.direction == Direction::StoV) {
        r += model.fusion.projection.weight.squaredNorm();
    } else {
        for (const auto& l : model.visual_map.layers) r += l.weight.squaredNorm();
    }
    return r;
}

LossAndGrad compute(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active, bool want_grads) {
    check_batch(model, batch, active);
    const auto& cfg = model.config;
    const double m_inv = 1.0 / static_cast<double>(batch.size());

    std::map<ModalityId, HeadTrace> heads;
    Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.head_out),
                                                  static_cast<Eigen::Index>(batch.classes.size()));
    for (const auto& m : active) {
        const auto& head = model.fusion.heads.at(m);
        HeadTrace& t = heads[m];
        t.input = stack_inputs(batch, m, cfg.modality_dims.at(m));
        t.hidden = run_layer(head.hidden, t.input);
        t.out = run_layer(head.out, t.hidden.out);
        fused += t.out.out;
    }

    LossAndGrad result;
    Eigen::MatrixXd residual;
    LayerTrace projection;
    VisualTrace visual;
    if (cfg.direction == Direction::StoV) {
        projection = run_layer(model.fusion.projection, fused);
        residual = gather_columns(projection.out, batch.sample_class) - batch.visual;
    } else {
        const Eigen::MatrixXd* x = &batch.visual;
        for (std::size_t i = 0; i < 3; ++i) {
            visual.layers[i] = run_layer(model.visual_map.layers[i], *x);
            x = &visual.layers[i].out;
        }
        residual = visual.layers[2].out - gather_columns(fused, batch.sample_class);
    }
    result.data_loss = residual.squaredNorm() * m_inv;
    result.loss = result.data_loss + cfg.lambda * regularizer(model, active);
    if (!want_grads) return result;

    GradientBundle& g = result.grads;
    g = GradientBundle::zeros_like(model);

    Eigen::MatrixXd d_fused;
    if (cfg.direction == Direction::StoV) {
        Eigen::MatrixXd d_embedded = scatter_sum_columns(residual, batch.sample_class, batch.classes.size()) * (2.0 * m_inv);
        d_fused = backprop_layer(model.fusion.projection, projection, d_embedded, g.fusion.projection);
        g.fusion.projection.weight += 2.0 * cfg.lambda * model.fusion.projection.weight;
    } else {
        Eigen::MatrixXd d_out = residual * (2.0 * m_inv);
        for (std::size_t i = 3; i-- > 0;) {
            d_out = backprop_layer(model.visual_map.layers[i], visual.layers[i], d_out, g.visual_map.layers[i], i > 0);
            g.visual_map.layers[i].weight += 2.0 * cfg.lambda * model.visual_map.layers[i].weight;
        }
        d_fused = scatter_sum_columns(residual, batch.sample_class, batch.classes.size()) * (-2.0 * m_inv);
    }

    for (const auto& m : active) {
        const auto& head = model.fusion.heads.at(m);
        auto& gh = g.fusion.heads.at(m);
        const HeadTrace& t = heads.at(m);
        Eigen::MatrixXd d_hidden = backprop_layer(head.out, t.out, d_fused, gh.out);
        backprop_layer(head.hidden, t.hidden, d_hidden, gh.hidden, false);
        gh.hidden.weight += 2.0 * cfg.lambda * head.hidden.weight;
        gh.out.weight += 2.0 * cfg.lambda * head.out.weight;
    }
    return result;
}

GroupedBatch ungrouped(std::span<const TrainPair> pairs, std::size_t embed_dim) {
    GroupedBatch b;
    b.visual.resize(static_cast<Eigen::Index>(embed_dim), static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (static_cast<std::size_t>(pairs[i].visual.size()) != embed_dim) {
            throw DimensionError("target dim " + std::to_string(pairs[i].visual.size()) + " does not match embed_dim " +
                                 std::to_string(embed_dim));
        }
        b.classes.push_back(&pairs[i].semantics);
        b.sample_class.push_back(i);
        b.visual.col(static_cast<Eigen::Index>(i)) = pairs[i].visual;
    }
    return b;
}

}  // namespace

std::string direction_name(Direction d) { return d == Direction::StoV ? "s2v" : "v2s"; }

std::string direction_label(Direction d) { return d == Direction::StoV ? "S->V" : "V->S"; }

Direction parse_direction(const std::string& text) {
    if (text == "s2v" || text == "S->V") return Direction::StoV;
    if (text == "v2s" || text == "V->S") return Direction::VtoS;
    throw ConfigError("unknown direction '" + text + "' (expected s2v or v2s)");
}

void NetConfig::validate() const {
    if (modality_dims.empty()) throw ConfigError("net config has no modalities");
    for (const auto& [m, d] : modality_dims) {
        if (d == 0) throw ConfigError("modality " + m.tag() + " has input dim 0");
    }
    if (head_hidden == 0 || head_out == 0 || embed_dim == 0) throw ConfigError("net dimensions must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
}

GradientBundle GradientBundle::zeros_like(const EmbeddingModel& model) {
    GradientBundle g;
    for (const auto& [m, head] : model.fusion.heads) {
        g.fusion.heads.emplace(m, FusionHead{zero_like(head.hidden), zero_like(head.out)});
    }
    g.fusion.projection = zero_like(model.fusion.projection);
    if (!model.visual_map.empty()) {
        for (std::size_t i = 0; i < 3; ++i) g.visual_map.layers[i] = zero_like(model.visual_map.layers[i]);
    }
    return g;
}

std::vector<ParamView> parameters(EmbeddingModel& model) {
    return collect<ParamView>(model.fusion, model.visual_map);
}
std::vector<ConstParamView> parameters(const EmbeddingModel& model) {
    return collect<ConstParamView>(model.fusion, model.visual_map);
}
std::vector<ParamView> parameters(GradientBundle& grads) {
    return collect<ParamView>(grads.fusion, grads.visual_map);
}
std::vector<ConstParamView> parameters(const GradientBundle& grads) {
    return collect<ConstParamView>(grads.fusion, grads.visual_map);
}

EmbeddingModel init_model(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    EmbeddingModel model;
    model.config = config;
    Rng rng(seed);
    for (const auto& [m, dim] : config.modality_dims) {
        FusionHead head;
        head.hidden = glorot(dim, config.head_hidden, rng);
        head.out = glorot(config.head_hidden, config.head_out, rng);
        model.fusion.heads.emplace(m, std::move(head));
    }
    model.fusion.projection = glorot(config.head_out, config.embed_dim, rng);
    if (config.direction == Direction::VtoS) {
        model.visual_map.layers[0] = glorot(config.embed_dim, config.head_out, rng);
        model.visual_map.layers[1] = glorot(config.head_out, config.head_hidden, rng);
        model.visual_map.layers[2] = glorot(config.head_hidden, config.head_out, rng);
    }
    return model;
}

void check_active(const EmbeddingModel& model, const ModalitySet& active) {
    if (active.empty()) throw InvariantError("empty active modality set");
    for (const auto& m : active) {
        if (!model.fusion.heads.count(m)) throw InvariantError("modality " + m.tag() + " is not configured in the model");
    }
}

ForwardOutput forward(const EmbeddingModel& model, const SemanticInputs& inputs, const ModalitySet& active) {
    check_active(model, active);
    ForwardOutput out;
    out.fused = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.config.head_out));
    for (const auto& m : active) {
        auto it = inputs.find(m);
        if (it == inputs.end()) throw InvariantError("missing input for modality " + m.tag());
        const auto& head = model.fusion.heads.at(m);
        if (it->second.size() != head.hidden.weight.cols()) {
            throw DimensionError("modality " + m.tag() + " input has dim " + std::to_string(it->second.size()) +
                                 ", expected " + std::to_string(head.hidden.weight.cols()));
        }
        Eigen::VectorXd h = relu(affine(head.hidden, it->second));
        out.fused += relu(affine(head.out, h));
    }
    out.embedded = relu(affine(model.fusion.projection, out.fused));
    return out;
}

Eigen::VectorXd map_visual(const VisualMapNet& net, const Eigen::VectorXd& x) {
    if (net.empty()) throw InvariantError("visual map is empty (model is not V->S)");
    if (x.size() != net.layers[0].weight.cols()) {
        throw DimensionError("visual input has dim " + std::to_string(x.size()) + ", expected " +
                             std::to_string(net.layers[0].weight.cols()));
    }
    Eigen::VectorXd h = x;
    for (const auto& layer : net.layers) h = relu(affine(layer, h));
    return h;
}

double min_abs_preactivation(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active) {
    check_batch(model, batch, active);
    double best = std::numeric_limits<double>::infinity();
    auto visit = [&](const LayerTrace& t) { best = std::min(best, t.pre.cwiseAbs().minCoeff()); };
    Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.config.head_out),
                                                  static_cast<Eigen::Index>(batch.classes.size()));
    for (const auto& m : active) {
        const auto& head = model.fusion.heads.at(m);
        Eigen::MatrixXd y = stack_inputs(batch, m, model.config.modality_dims.at(m));
        LayerTrace h = run_layer(head.hidden, y);
        LayerTrace o = run_layer(head.out, h.out);
        visit(h);
        visit(o);
        fused += o.out;
    }
    if (model.config.direction == Direction::StoV) {
        visit(run_layer(model.fusion.projection, fused));
    } else {
        Eigen::MatrixXd x = batch.visual;
        for (const auto& layer : model.visual_map.layers) {
            LayerTrace t = run_layer(layer, x);
            visit(t);
            x = t.out;
        }
    }
    return best;
}

LossAndGrad loss_and_grad(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active) {
    return compute(model, batch, active, true);
}

LossAndGrad loss_and_grad(const EmbeddingModel& model, std::span<const TrainPair> batch, const ModalitySet& active) {
    if (batch.empty()) throw InvariantError("empty batch");
    return compute(model, ungrouped(batch, model.config.embed_dim), active, true);
}

double loss_value(const EmbeddingModel& model, const GroupedBatch& batch, const ModalitySet& active) {
    return compute(model, batch, active, false).loss;
}

}  // namespace zsl
