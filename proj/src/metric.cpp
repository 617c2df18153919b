#include "zsl/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "zsl/error.hpp"

namespace zsl {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

void check_eta(double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvariantError("eta must lie in [0, 1], got " + detail::format_exact(eta));
}

std::span<const double> row_span(const RowMatrix& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

MetricKind MetricKind::ec(double eta) {
    check_eta(eta);
    return {Kind::EC, eta};
}

std::string MetricKind::name() const {
    switch (kind) {
        case Kind::EuclideanSq: return "euclidean";
        case Kind::Cosine: return "cosine";
        case Kind::EC: return "ec(" + detail::format_exact(eta) + ")";
    }
    return "?";
}

MetricKind parse_metric(const std::string& name, double eta) {
    if (name == "euclidean") return MetricKind::euclidean();
    if (name == "cosine") return MetricKind::cosine();
    if (name == "ec") return MetricKind::ec(eta);
    throw ConfigError("unknown metric '" + name + "' (expected euclidean, cosine or ec)");
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b);
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

double euclidean_sq(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double ec_distance(std::span<const double> a, std::span<const double> b, double eta) {
    check_eta(eta);
    double sq = euclidean_sq(a, b);
    if (eta == 0.0) return sq;
    return (1.0 - eta * cosine_sim(a, b)) * sq;
}

double distance(std::span<const double> a, std::span<const double> b, const MetricKind& metric) {
    switch (metric.kind) {
        case MetricKind::Kind::EuclideanSq: return euclidean_sq(a, b);
        case MetricKind::Kind::Cosine: return 1.0 - cosine_sim(a, b);
        case MetricKind::Kind::EC: return ec_distance(a, b, metric.eta);
    }
    return 0.0;
}

RowMatrix pairwise_distances(const RowMatrix& queries, const RowMatrix& prototypes, const MetricKind& metric) {
    if (queries.cols() != prototypes.cols()) {
        throw DimensionError("query dim " + std::to_string(queries.cols()) + " does not match prototype dim " +
                             std::to_string(prototypes.cols()));
    }
    RowMatrix out(queries.rows(), prototypes.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        auto q = row_span(queries, i);
        for (Eigen::Index c = 0; c < prototypes.rows(); ++c) out(i, c) = distance(q, row_span(prototypes, c), metric);
    }
    return out;
}

std::vector<std::size_t> rank_classes(std::span<const double> dist_row, std::size_t k) {
    if (k == 0 || k > dist_row.size()) {
        throw InvariantError("rank_classes: k=" + std::to_string(k) + " must lie in [1, " +
                             std::to_string(dist_row.size()) + "]");
    }
    std::vector<std::size_t> idx(dist_row.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        return dist_row[a] < dist_row[b] || (dist_row[a] == dist_row[b] && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), less);
    idx.resize(k);
    return idx;
}

}  // namespace zsl
