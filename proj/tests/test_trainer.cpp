#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "zsl/error.hpp"
#include "zsl/rng.hpp"
#include "zsl/synth.hpp"
#include "zsl/trainer.hpp"

using namespace zsl;

namespace {

struct Scalar {
    std::vector<double> p{0.0};
    std::vector<double> g{0.0};
    std::vector<ParamView> params() { return {{"p", p, 1, 1, true}}; }
    std::vector<ConstParamView> grads() const { return {{"p", g, 1, 1, true}}; }
};

OptimState scalar_state(const OptimizerConfig& opt) {
    std::vector<double> zero{0.0};
    return make_optim_state(std::vector<ConstParamView>{{"p", zero, 1, 1, true}}, opt);
}

NetConfig tiny_net() {
    NetConfig c;
    c.head_hidden = 16;
    c.head_out = 24;
    c.embed_dim = 64;
    return c;
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "<no error>";
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Optimizer, AdamFirstStep) {
    Scalar s;
    s.p[0] = 1.0;
    s.g[0] = 0.5;
    OptimizerConfig opt = Adam{};
    auto state = scalar_state(opt);
    optimizer_step(state, s.params(), s.grads(), opt);
    EXPECT_NEAR(s.p[0], 1.0 - 0.0001 * (0.5 / (0.5 + 1e-8)), 1e-15);
    EXPECT_NEAR(s.p[0], 0.9999, 1e-9);
    EXPECT_EQ(state.step, 1u);
}

TEST(Optimizer, SgdMomentumTwoSteps) {
    Scalar s;
    s.p[0] = 1.0;
    s.g[0] = 1.0;
    OptimizerConfig opt = SgdMomentum{0.1, 0.9};
    auto state = scalar_state(opt);
    optimizer_step(state, s.params(), s.grads(), opt);
    EXPECT_NEAR(s.p[0], 0.9, 1e-15);
    optimizer_step(state, s.params(), s.grads(), opt);
    EXPECT_NEAR(s.p[0], 0.71, 1e-15);
}

TEST(Optimizer, ZeroGradientIsFixedPoint) {
    for (OptimizerConfig opt : {OptimizerConfig{Adam{}}, OptimizerConfig{SgdMomentum{}}}) {
        Scalar s;
        s.p[0] = 3.25;
        auto state = scalar_state(opt);
        for (int i = 0; i < 10; ++i) optimizer_step(state, s.params(), s.grads(), opt);
        EXPECT_EQ(s.p[0], 3.25);
    }
}

TEST(Optimizer, MatchesScalarReference) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Adam adam{0.01, 0.8, 0.99, 1e-6};
    const SgdMomentum sgd{0.05, 0.7};
    Scalar a, b;
    a.p[0] = b.p[0] = u(gen);
    double ra = a.p[0], rb = b.p[0];
    double m = 0, v = 0, vel = 0;
    auto sa = scalar_state(adam);
    auto sb = scalar_state(sgd);
    for (int t = 1; t <= 50; ++t) {
        const double g = u(gen);
        a.g[0] = b.g[0] = g;
        optimizer_step(sa, a.params(), a.grads(), adam);
        optimizer_step(sb, b.params(), b.grads(), sgd);
        m = adam.beta1 * m + (1 - adam.beta1) * g;
        v = adam.beta2 * v + (1 - adam.beta2) * g * g;
        const double mhat = m / (1 - std::pow(adam.beta1, t));
        const double vhat = v / (1 - std::pow(adam.beta2, t));
        ra -= adam.lr * mhat / (std::sqrt(vhat) + adam.epsilon);
        vel = sgd.momentum * vel + g;
        rb -= sgd.lr * vel;
        EXPECT_NEAR(a.p[0], ra, 1e-12 * std::abs(ra));
        EXPECT_NEAR(b.p[0], rb, 1e-12 * std::abs(rb));
    }
}

TEST(Optimizer, VanishingLearningRateLeavesParametersUnchanged) {
    Scalar s;
    s.p[0] = 0.75;
    OptimizerConfig opt = Adam{};
    auto state = scalar_state(opt);
    state.lr = 0.0;
    for (int i = 0; i < 25; ++i) {
        s.g[0] = 0.1 * (i - 12);
        optimizer_step(state, s.params(), s.grads(), opt);
    }
    EXPECT_EQ(s.p[0], 0.75);
}

TEST(Optimizer, ShapeMismatchThrows) {
    Scalar s;
    std::vector<double> two{1.0, 2.0};
    auto state = scalar_state(Adam{});
    EXPECT_THROW(optimizer_step(state, s.params(), {{"p", two, 2, 1, true}}, Adam{}), DimensionError);
    EXPECT_THROW(optimizer_step(state, s.params(), {}, Adam{}), DimensionError);
}

TEST(Schedule, ExactGeometricDecay) {
    for (std::size_t e = 0; e < 30; ++e) EXPECT_EQ(scheduled_lr(0.01, 0.9, e), 0.01 * std::pow(0.9, static_cast<double>(e)));
    auto ds = generate(SynthConfig{});
    TrainConfig tc;
    tc.epochs = 4;
    tc.lr_decay = 0.9;
    tc.optimizer = Adam{0.001};
    auto r = train(ds, tiny_net(), tc, {"W"});
    ASSERT_EQ(r.history.lr.size(), 4u);
    for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(r.history.lr[e], scheduled_lr(0.001, 0.9, e));
}

TEST(TrainConfig, ValidationRejectsBadValues) {
    TrainConfig tc;
    tc.batch_size = 0;
    EXPECT_THROW(tc.validate(), ConfigError);
    tc = {};
    tc.lr_decay = 1.5;
    EXPECT_THROW(tc.validate(), ConfigError);
    tc = {};
    tc.optimizer = SgdMomentum{0.1, 1.0};
    EXPECT_THROW(tc.validate(), ConfigError);
    tc = {};
    tc.optimizer = Adam{-1.0};
    EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
    auto ds = generate(SynthConfig{});
    TrainConfig tc;
    tc.epochs = 0;
    tc.seed = 4;
    auto r = train(ds, tiny_net(), tc, {"W", "C"});
    EXPECT_TRUE(r.history.loss.empty());
    EXPECT_TRUE(r.history.lr.empty());
    auto init = init_model(resolve_net_config(tiny_net(), ds, {"W", "C"}), mix_seed(4, 1));
    EXPECT_EQ(serialize_checkpoint(r.model), serialize_checkpoint(init));
}

TEST(Train, DeterministicInSeed) {
    auto ds = generate(SynthConfig{});
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 100;
    tc.seed = 9;
    for (auto dir : {Direction::StoV, Direction::VtoS}) {
        auto net = tiny_net();
        net.direction = dir;
        auto a = train(ds, net, tc, {"W", "I"});
        auto b = train(ds, net, tc, {"W", "I"});
        EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
        EXPECT_EQ(a.history.loss, b.history.loss);
        tc.seed = 10;
        EXPECT_NE(serialize_checkpoint(train(ds, net, tc, {"W", "I"}).model), serialize_checkpoint(a.model));
        tc.seed = 9;
    }
}

TEST(Train, LossHalvesWithinFiftyEpochsOnDefaultSynth) {
    auto ds = generate(SynthConfig{});
    NetConfig net;
    net.embed_dim = 64;
    TrainConfig tc;
    tc.epochs = 50;
    auto r = train(ds, net, tc, {"W", "C", "I", "T"});
    ASSERT_EQ(r.history.loss.size(), 50u);
    EXPECT_LT(r.history.loss.back(), 0.5 * r.history.loss.front());
}

TEST(Train, Errors) {
    auto ds = generate(SynthConfig{});
    TrainConfig tc;
    EXPECT_THROW(train(ds, tiny_net(), tc, {}), InvariantError);
    NetConfig wrong = tiny_net();
    wrong.embed_dim = 10;
    EXPECT_THROW(train(ds, wrong, tc, {"W"}), DimensionError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    auto dir = oracle::temp_dir("ckpt");
    for (auto d : {Direction::StoV, Direction::VtoS}) {
        NetConfig c = tiny_net();
        c.modality_dims = {{"W", 5}, {"T", 3}, {"Extra", 2}};
        c.direction = d;
        c.lambda = 0.1 + 0.2;  // not exactly representable in short decimal
        auto m = init_model(c, 77);
        std::mt19937_64 gen(77);
        for (auto& p : parameters(m))
            for (auto& x : p.values) x = std::ldexp(static_cast<double>(gen() >> 11), -40) - 4096.0;
        save_checkpoint(m, dir / "m.zslc");
        auto back = load_checkpoint(dir / "m.zslc");
        EXPECT_EQ(back.config, m.config);
        auto pa = parameters(std::as_const(m));
        auto pb = parameters(std::as_const(back));
        ASSERT_EQ(pa.size(), pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            EXPECT_EQ(pa[i].name, pb[i].name);
            EXPECT_EQ(std::memcmp(pa[i].values.data(), pb[i].values.data(), pa[i].values.size_bytes()), 0);
        }
        EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(m));
    }
}

TEST(Checkpoint, CorruptionAndVersionErrors) {
    auto dir = oracle::temp_dir("ckpt_bad");
    auto c = tiny_net();
    c.modality_dims = {{"W", 3}};
    auto m = init_model(c, 1);
    auto bytes = serialize_checkpoint(m);

    write_bytes(dir / "trunc.zslc", {bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2)});
    EXPECT_NE(error_of([&] { load_checkpoint(dir / "trunc.zslc"); }).find("corrupted payload"), std::string::npos);

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    EXPECT_NE(error_of([&] { deserialize_checkpoint(flipped); }).find("corrupted payload"), std::string::npos);

    auto versioned = bytes;
    versioned[4] = static_cast<unsigned char>(999 & 0xff);
    versioned[5] = static_cast<unsigned char>(999 >> 8);
    write_bytes(dir / "v999.zslc", versioned);
    EXPECT_NE(error_of([&] { load_checkpoint(dir / "v999.zslc"); }).find("unsupported version"), std::string::npos);

    EXPECT_THROW(load_checkpoint(dir / "absent.zslc"), IoError);
    EXPECT_NE(error_of([&] { deserialize_checkpoint(std::vector<unsigned char>{'Z', 'S'}); }).find("not a checkpoint"),
              std::string::npos);
}
