#include "zsl/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "zsl/error.hpp"
#include "zsl/rng.hpp"

namespace zsl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void TrainConfig::validate() const {
    std::visit(overloaded{
                   [](const Adam& a) {
                       if (!(a.lr > 0.0)) throw ConfigError("learning rate must be > 0");
                       if (!(a.beta1 > 0.0 && a.beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
                       if (!(a.beta2 > 0.0 && a.beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
                       if (!(a.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
                   },
                   [](const SgdMomentum& s) {
                       if (!(s.lr > 0.0)) throw ConfigError("learning rate must be > 0");
                       if (!(s.momentum >= 0.0 && s.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
                   },
               },
               optimizer);
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr decay must lie in (0, 1]");
    if (lambda && !(*lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
}

double TrainConfig::base_lr() const {
    return std::visit([](const auto& o) { return o.lr; }, optimizer);
}

OptimState make_optim_state(const std::vector<ConstParamView>& params, const OptimizerConfig& optimizer) {
    OptimState state;
    for (const auto& p : params) {
        state.first.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
        if (std::holds_alternative<Adam>(optimizer)) {
            state.second.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.values.size())));
        }
    }
    state.lr = std::visit([](const auto& o) { return o.lr; }, optimizer);
    return state;
}

OptimState make_optim_state(const EmbeddingModel& model, const OptimizerConfig& optimizer) {
    return make_optim_state(parameters(model), optimizer);
}

void optimizer_step(OptimState& state, const std::vector<ParamView>& params, const std::vector<ConstParamView>& grads,
                    const OptimizerConfig& optimizer) {
    if (params.size() != grads.size() || params.size() != state.first.size()) {
        throw DimensionError("optimizer: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].values.size() != grads[i].values.size() ||
            static_cast<std::size_t>(state.first[i].size()) != params[i].values.size()) {
            throw DimensionError("optimizer: shape mismatch for " + params[i].name);
        }
    }
    ++state.step;
    const double lr = state.lr;
    std::visit(overloaded{
                   [&](const Adam& a) {
                       if (state.second.size() != params.size()) throw DimensionError("optimizer: state is not Adam state");
                       const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(state.step));
                       const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(state.step));
                       for (std::size_t i = 0; i < params.size(); ++i) {
                           auto m = state.first[i].array();
                           auto v = state.second[i].array();
                           Eigen::Map<Eigen::ArrayXd> p(params[i].values.data(), static_cast<Eigen::Index>(params[i].values.size()));
                           Eigen::Map<const Eigen::ArrayXd> g(grads[i].values.data(), static_cast<Eigen::Index>(grads[i].values.size()));
                           m = a.beta1 * m + (1.0 - a.beta1) * g;
                           v = a.beta2 * v + (1.0 - a.beta2) * g * g;
                           p -= lr * (m / c1) / ((v / c2).sqrt() + a.epsilon);
                       }
                   },
                   [&](const SgdMomentum& s) {
                       for (std::size_t i = 0; i < params.size(); ++i) {
                           auto u = state.first[i].array();
                           Eigen::Map<Eigen::ArrayXd> p(params[i].values.data(), static_cast<Eigen::Index>(params[i].values.size()));
                           Eigen::Map<const Eigen::ArrayXd> g(grads[i].values.data(), static_cast<Eigen::Index>(grads[i].values.size()));
                           u = s.momentum * u + g;
                           p -= lr * u;
                       }
                   },
               },
               optimizer);
}

void optimizer_step(OptimState& state, EmbeddingModel& model, const GradientBundle& grads,
                    const OptimizerConfig& optimizer) {
    auto params = parameters(model);
    auto g = parameters(grads);
    for (std::size_t i = 0; i < std::min(params.size(), g.size()); ++i) {
        if (params[i].name != g[i].name || params[i].rows != g[i].rows || params[i].cols != g[i].cols) {
            throw DimensionError("optimizer: gradient layout differs at " + params[i].name);
        }
    }
    optimizer_step(state, params, g, optimizer);
}

double scheduled_lr(double base_lr, double decay, std::size_t epoch) {
    return base_lr * std::pow(decay, static_cast<double>(epoch));
}

NetConfig resolve_net_config(NetConfig config, const Dataset& dataset, const ModalitySet& active) {
    for (const auto& table : dataset.semantics()) {
        if (!active.count(table.modality()) && !config.modality_dims.count(table.modality())) continue;
        auto [it, inserted] = config.modality_dims.try_emplace(table.modality(), table.dim());
        if (!inserted && it->second != table.dim()) {
            throw DimensionError("modality " + table.modality().tag() + " is configured with dim " +
                                 std::to_string(it->second) + " but the dataset table has dim " +
                                 std::to_string(table.dim()));
        }
    }
    if (config.embed_dim != dataset.visual().dim()) {
        throw DimensionError("embed_dim " + std::to_string(config.embed_dim) + " does not match visual feature dim " +
                             std::to_string(dataset.visual().dim()));
    }
    config.validate();
    return config;
}

TrainResult train(const Dataset& dataset, const NetConfig& net_config, const TrainConfig& train_config,
                  const ModalitySet& active) {
    train_config.validate();
    if (active.empty()) throw InvariantError("empty active modality set");
    NetConfig cfg = resolve_net_config(net_config, dataset, active);
    if (train_config.lambda) cfg.lambda = *train_config.lambda;

    TrainResult result{init_model(cfg, mix_seed(train_config.seed, 1)), {}};
    check_active(result.model, active);
    const FeatureMatrix& visual = dataset.visual();
    const std::size_t n = visual.rows();
    if (n == 0) throw InvariantError("empty training set");
    if (train_config.epochs == 0) return result;

    // Semantic inputs per seen class, shared by every sample of the class.
    std::map<ClassId, SemanticInputs> class_inputs;
    for (ClassId c : dataset.seen_classes()) {
        SemanticInputs& in = class_inputs[c];
        for (const auto& m : active) in.emplace(m, dataset.semantic(m).at(c));
    }
    const Eigen::MatrixXd targets = visual.values().cast<double>().transpose();

    OptimState state = make_optim_state(result.model, train_config.optimizer);
    Rng shuffle_rng(mix_seed(train_config.seed, 2));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch_size = std::min(train_config.batch_size, n);

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        state.lr = scheduled_lr(train_config.base_lr(), train_config.lr_decay, epoch);
        if (train_config.shuffle) shuffle_rng.shuffle(order);
        double weighted_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t end = std::min(start + batch_size, n);
            GroupedBatch batch;
            batch.visual.resize(targets.rows(), static_cast<Eigen::Index>(end - start));
            std::unordered_map<ClassId, std::size_t> slot;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t s = order[i];
                const ClassId c = visual.labels()[s];
                auto [it, inserted] = slot.try_emplace(c, batch.classes.size());
                if (inserted) batch.classes.push_back(&class_inputs.at(c));
                batch.sample_class.push_back(it->second);
                batch.visual.col(static_cast<Eigen::Index>(i - start)) = targets.col(static_cast<Eigen::Index>(s));
            }
            auto lg = loss_and_grad(result.model, batch, active);
            optimizer_step(state, result.model, lg.grads, train_config.optimizer);
            weighted_loss += lg.loss * static_cast<double>(end - start);
        }
        result.history.loss.push_back(weighted_loss / static_cast<double>(n));
        result.history.lr.push_back(state.lr);
        spdlog::debug("epoch {} loss {:.6g} lr {:.3g}", epoch, result.history.loss.back(), state.lr);
    }
    return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::string text = "epoch,loss,lr\n";
    for (std::size_t e = 0; e < history.loss.size(); ++e) {
        text += std::to_string(e) + "," + detail::format_exact(history.loss[e]) + "," + detail::format_exact(history.lr[e]) + "\n";
    }
    detail::write_text_file(path, text);
}

}  // namespace zsl
