#include <gtest/gtest.h>

#include "zsl/error.hpp"
#include "zsl/synth.hpp"

using namespace zsl;

TEST(Synth, DefaultInstancePassesInvariants) {
    SynthConfig c;
    auto ds = generate(c);
    EXPECT_EQ(ds.seen_classes().size(), 18u);
    EXPECT_EQ(ds.unseen_classes().size(), 6u);
    EXPECT_EQ(ds.visual().rows(), 18u * 30u);
    EXPECT_EQ(ds.test_visual().rows(), 6u * 30u);
    EXPECT_EQ(ds.visual().dim(), 64u);
    EXPECT_EQ(modality_set_name(ds.modalities()), "W+C+I+T");
    EXPECT_GE(ds.visual().values().minCoeff(), 0.0f);
    EXPECT_GE(ds.test_visual().values().minCoeff(), 0.0f);
    for (const auto& t : ds.semantics()) EXPECT_EQ(t.vectors().size(), 24u);
}

TEST(Synth, CoordinateWindowsCoverTheLatentSpace) {
    SynthConfig c;
    auto coords = modality_coordinates(c);
    ASSERT_EQ(coords.size(), 4u);
    std::set<std::size_t> all;
    for (const auto& w : coords) {
        EXPECT_EQ(w.size(), 8u);
        all.insert(w.begin(), w.end());
    }
    EXPECT_EQ(all.size(), 16u);
}

TEST(Synth, SameSeedIsBitIdentical) {
    SynthConfig c;
    c.seed = 12;
    auto a = generate(c);
    auto b = generate(c);
    EXPECT_TRUE(a.visual() == b.visual());
    EXPECT_TRUE(a.test_visual() == b.test_visual());
    EXPECT_EQ(a.seen_classes(), b.seen_classes());
    for (std::size_t i = 0; i < a.semantics().size(); ++i) {
        for (const auto& [cls, v] : a.semantics()[i].vectors()) EXPECT_EQ(v, b.semantics()[i].at(cls));
    }
    c.seed = 13;
    EXPECT_FALSE(generate(c).visual() == a.visual());
}

TEST(Synth, NoiselessFullInformationIsInjective) {
    SynthConfig c;
    c.n_classes = 12;
    c.n_seen = 8;
    c.latent_dim = 6;
    c.modalities = {{"W", 10, 1.0, 0.0}, {"C", 8, 1.0, 0.0}};
    auto ds = generate(c);
    for (const auto& t : ds.semantics()) {
        // Anchors in general position span the latent space, so the class
        // vectors of an injective linear image do as well.
        Eigen::MatrixXd m(static_cast<Eigen::Index>(t.vectors().size()), static_cast<Eigen::Index>(t.dim()));
        Eigen::Index r = 0;
        for (const auto& [cls, v] : t.vectors()) m.row(r++) = v.transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
        lu.setThreshold(1e-6);
        EXPECT_EQ(lu.rank(), 6) << t.modality().tag();
    }
}

TEST(Synth, StoredValuesSurviveFloatNarrowing) {
    auto ds = generate(SynthConfig{});
    for (const auto& t : ds.semantics())
        for (const auto& [cls, v] : t.vectors())
            for (double x : v) EXPECT_EQ(static_cast<double>(static_cast<float>(x)), x);
}

TEST(Synth, InvalidConfigsThrow) {
    SynthConfig c;
    c.n_seen = c.n_classes;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.modalities[0].information_fraction = 0.0;
    EXPECT_THROW(generate(c), ConfigError);
    c = {};
    c.embed_dim = 0;
    EXPECT_THROW(generate(c), ConfigError);
}
