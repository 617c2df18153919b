#pragma once

#include <span>
#include <string>
#include <vector>

#include "zsl/data_model.hpp"

namespace zsl {

/// Distance selector. `eta` only matters for the Euclidean-Cosine kind.
struct MetricKind {
    enum class Kind { EuclideanSq, Cosine, EC };

    Kind kind = Kind::EuclideanSq;
    double eta = 0.0;

    static MetricKind euclidean() { return {Kind::EuclideanSq, 0.0}; }
    static MetricKind cosine() { return {Kind::Cosine, 0.0}; }
    /// Throws InvariantError unless 0 <= eta <= 1.
    static MetricKind ec(double eta);

    /// "euclidean", "cosine" or "ec(0.9)".
    std::string name() const;

    bool operator==(const MetricKind&) const = default;
};

/// Parses "euclidean" | "cosine" | "ec"; `eta` is used for the EC kind.
MetricKind parse_metric(const std::string& name, double eta);

/// a.b / (|a||b|), or 0 when either norm is 0.
double cosine_sim(std::span<const double> a, std::span<const double> b);

double euclidean_sq(std::span<const double> a, std::span<const double> b);

/// Euclidean-Cosine distance: (1 - eta * cos<a,b>) * |a - b|^2.
double ec_distance(std::span<const double> a, std::span<const double> b, double eta);

/// Distance under `metric`; the Cosine kind yields 1 - cosine_sim.
double distance(std::span<const double> a, std::span<const double> b, const MetricKind& metric);

/// Entry (i, c) is distance(queries.row(i), prototypes.row(c)).
RowMatrix pairwise_distances(const RowMatrix& queries, const RowMatrix& prototypes, const MetricKind& metric);

/// Indices of the k smallest entries, ascending by distance, ties by index.
std::vector<std::size_t> rank_classes(std::span<const double> dist_row, std::size_t k);

}  // namespace zsl
