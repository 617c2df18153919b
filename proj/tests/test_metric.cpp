#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "zsl/error.hpp"
#include "zsl/metric.hpp"

using namespace zsl;

namespace {
using V = std::vector<double>;

std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double scale = 3.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    V v(n);
    for (auto& x : v) x = u(gen);
    return v;
}
}  // namespace

TEST(Cosine, Examples) {
    EXPECT_DOUBLE_EQ(cosine_sim(V{1, 0}, V{1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(cosine_sim(V{1, 0}, V{0, 1}), 0.0);
    EXPECT_NEAR(cosine_sim(V{1, 0}, V{1.05, 0.55}), 1.05 / std::sqrt(1.405), 1e-12);
    EXPECT_NEAR(cosine_sim(V{1, 0}, V{1.05, 0.55}), 0.88584, 1e-4);
}

TEST(Cosine, ZeroVectorIsZeroAndLengthMismatchThrows) {
    EXPECT_EQ(cosine_sim(V{0, 0}, V{1, 2}), 0.0);
    EXPECT_EQ(cosine_sim(V{0, 0}, V{0, 0}), 0.0);
    EXPECT_THROW(cosine_sim(V{1}, V{1, 2}), DimensionError);
    EXPECT_THROW(ec_distance(V{1}, V{1, 2}, 0.5), DimensionError);
}

TEST(EcDistance, Examples) {
    EXPECT_EQ(ec_distance(V{3, -1, 2}, V{3, -1, 2}, 0.9), 0.0);
    EXPECT_DOUBLE_EQ(ec_distance(V{1, 0}, V{0, 1}, 0.0), 2.0);
    EXPECT_NEAR(ec_distance(V{1, 0}, V{1.6, 0}, 0.9), 0.0360, 1e-4);
    EXPECT_NEAR(ec_distance(V{1, 0}, V{1.05, 0.55}, 0.9), 0.06184, 1e-4);
    EXPECT_NEAR(ec_distance(V{1, 0}, V{1.6, 0}, 0.9), oracle::ec({1, 0}, {1.6, 0}, 0.9), 1e-15);
}

TEST(EcDistance, ZeroVectorDegradesToEuclidean) {
    EXPECT_DOUBLE_EQ(ec_distance(V{0, 0}, V{3, 4}, 0.9), 25.0);
}

TEST(EcDistance, EtaOutOfRangeThrows) {
    EXPECT_THROW(ec_distance(V{1}, V{2}, 1.5), InvariantError);
    EXPECT_THROW(ec_distance(V{1}, V{2}, -0.1), InvariantError);
    EXPECT_THROW(MetricKind::ec(1.01), InvariantError);
    EXPECT_NO_THROW(MetricKind::ec(1.0));
}

TEST(EcDistance, InvertsEuclideanArgmin) {
    const V v{1, 0}, c1{1.6, 0}, c2{1.05, 0.55};
    EXPECT_LT(euclidean_sq(v, c2), euclidean_sq(v, c1));
    EXPECT_LT(ec_distance(v, c1, 0.9), ec_distance(v, c2, 0.9));
}

TEST(EcDistance, PropertiesOnRandomVectors) {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> eta_dist(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + trial % 12;
        auto a = random_vector(gen, n);
        auto b = random_vector(gen, n);
        const double eta = eta_dist(gen);
        EXPECT_EQ(ec_distance(a, b, eta), ec_distance(b, a, eta));
        EXPECT_GE(ec_distance(a, b, eta), 0.0);
        EXPECT_GE(ec_distance(a, b, 1.0), 0.0);
        const double sq = oracle::sq_dist(a, b);
        EXPECT_NEAR(ec_distance(a, b, 0.0), sq, 1e-12 * sq);
        EXPECT_NEAR(ec_distance(a, b, eta), oracle::ec(a, b, eta), 1e-12 * std::max(1.0, sq));
    }
}

TEST(PairwiseDistances, Examples) {
    RowMatrix q(1, 2), p(1, 2);
    q << 0, 0;
    p << 0, 0;
    EXPECT_EQ(pairwise_distances(q, p, MetricKind::euclidean())(0, 0), 0.0);

    RowMatrix v(1, 2), c(2, 2);
    v << 1, 0;
    c << 1.6, 0, 1.05, 0.55;
    auto d = pairwise_distances(v, c, MetricKind::ec(0.9));
    EXPECT_NEAR(d(0, 0), 0.0360, 1e-4);
    EXPECT_NEAR(d(0, 1), 0.0618, 1e-4);

    auto cos = pairwise_distances(v, c, MetricKind::cosine());
    EXPECT_DOUBLE_EQ(cos(0, 0), 0.0);
    EXPECT_NEAR(cos(0, 1), 1.0 - 0.88584, 1e-4);

    EXPECT_THROW(pairwise_distances(RowMatrix::Zero(1, 3), c, MetricKind::euclidean()), DimensionError);
}

TEST(PairwiseDistances, MatchesBruteForceDoubleLoop) {
    std::mt19937_64 gen(7);
    RowMatrix q(2, 4), p(3, 4);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = random_vector(gen, 1)[0];
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = random_vector(gen, 1)[0];
    auto d = pairwise_distances(q, p, MetricKind::euclidean());
    for (int i = 0; i < 2; ++i) {
        for (int c = 0; c < 3; ++c) {
            double s = 0;
            for (int j = 0; j < 4; ++j) s += (q(i, j) - p(c, j)) * (q(i, j) - p(c, j));
            EXPECT_EQ(d(i, c), s);
        }
    }
}

TEST(RankClasses, Examples) {
    EXPECT_EQ(rank_classes(V{0.3, 0.1, 0.2}, 1), (std::vector<std::size_t>{1}));
    EXPECT_EQ(rank_classes(V{0.5, 0.5}, 2), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(rank_classes(V{0.2, 0.1, 0.1, 0.1}, 3), (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_THROW(rank_classes(V{0.1, 0.2}, 0), InvariantError);
    EXPECT_THROW(rank_classes(V{0.1, 0.2}, 3), InvariantError);
}

TEST(RankClasses, MatchesSortOracleAndIsScaleInvariant) {
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> coarse(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        V row(10);
        // Coarse values force plenty of ties.
        for (auto& x : row) x = trial % 2 ? coarse(gen) * 0.25 : random_vector(gen, 1)[0];
        const std::size_t k = 1 + trial % 10;
        auto expected = oracle::sorted_indices(row);
        expected.resize(k);
        EXPECT_EQ(rank_classes(row, k), expected);
        V scaled = row;
        for (auto& x : scaled) x *= 3.7;
        EXPECT_EQ(rank_classes(scaled, k), expected);
    }
}

TEST(MetricKind, NamesAndParsing) {
    EXPECT_EQ(MetricKind::ec(0.9).name(), "ec(0.9)");
    EXPECT_EQ(parse_metric("euclidean", 0.3), MetricKind::euclidean());
    EXPECT_EQ(parse_metric("ec", 0.3), MetricKind::ec(0.3));
    EXPECT_EQ(parse_metric("cosine", 0.3), MetricKind::cosine());
    EXPECT_THROW(parse_metric("manhattan", 0.0), ConfigError);
}
