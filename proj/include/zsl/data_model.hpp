#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace zsl {

using ClassId = std::uint64_t;
using ClassSet = std::set<ClassId>;

/// Row-major double matrix used for prototypes, embeddings and distances.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Identifies a semantic modality. The four built-in tags order first
/// (W, C, I, T); user-defined tags follow in lexicographic order.
class ModalityId {
public:
    ModalityId() = default;
    ModalityId(std::string tag);  // NOLINT(google-explicit-constructor)
    ModalityId(const char* tag) : ModalityId(std::string(tag)) {}  // NOLINT

    static ModalityId word() { return {"W"}; }
    static ModalityId cartoon() { return {"C"}; }
    static ModalityId image() { return {"I"}; }
    static ModalityId text() { return {"T"}; }

    const std::string& tag() const { return tag_; }
    bool builtin() const { return rank_ < 4; }

    std::strong_ordering operator<=>(const ModalityId& other) const;
    bool operator==(const ModalityId& other) const { return tag_ == other.tag_; }

private:
    std::string tag_;
    int rank_ = 4;
};

using ModalitySet = std::set<ModalityId>;

/// Tags joined by '+', in canonical order ("W+C+I+T").
std::string modality_set_name(const ModalitySet& set);

/// Parses "W,C,I" or "W+C+I". Throws ConfigError on an empty list.
ModalitySet parse_modality_set(const std::string& text);

/// Dense visual features, one float32 row per sample with an aligned label.
/// Immutable once constructed; the constructor enforces the invariants.
class FeatureMatrix {
public:
    using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    FeatureMatrix(Storage values, std::vector<ClassId> labels);

    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
    const Storage& values() const { return values_; }
    const std::vector<ClassId>& labels() const { return labels_; }

    /// Row i widened to double.
    Eigen::VectorXd row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)).cast<double>(); }

    /// All rows widened to double.
    RowMatrix as_double() const { return values_.cast<double>(); }

    ClassSet classes() const { return {labels_.begin(), labels_.end()}; }

    bool operator==(const FeatureMatrix& other) const;

private:
    Storage values_;
    std::vector<ClassId> labels_;
};

/// Per-class semantic vectors of one modality.
class SemanticTable {
public:
    SemanticTable(ModalityId modality, std::map<ClassId, Eigen::VectorXd> vectors);

    const ModalityId& modality() const { return modality_; }
    std::size_t dim() const { return dim_; }
    const std::map<ClassId, Eigen::VectorXd>& vectors() const { return vectors_; }
    bool covers(ClassId c) const { return vectors_.count(c) != 0; }
    const Eigen::VectorXd& at(ClassId c) const;

private:
    ModalityId modality_;
    std::size_t dim_ = 0;
    std::map<ClassId, Eigen::VectorXd> vectors_;
};

/// Visual features, semantic tables and a disjoint seen/unseen split. Only
/// make_dataset builds one, so a Dataset value is always valid.
class Dataset {
public:
    const FeatureMatrix& visual() const { return visual_; }
    const FeatureMatrix& test_visual() const { return test_visual_; }
    const std::vector<SemanticTable>& semantics() const { return semantics_; }
    const ClassSet& seen_classes() const { return seen_; }
    const ClassSet& unseen_classes() const { return unseen_; }

    const SemanticTable& semantic(const ModalityId& modality) const;
    ModalitySet modalities() const;

private:
    Dataset(FeatureMatrix visual, FeatureMatrix test_visual, std::vector<SemanticTable> semantics,
            ClassSet seen, ClassSet unseen);

    friend Dataset make_dataset(FeatureMatrix, FeatureMatrix, std::vector<SemanticTable>, ClassSet, ClassSet);

    FeatureMatrix visual_;
    FeatureMatrix test_visual_;
    std::vector<SemanticTable> semantics_;
    ClassSet seen_;
    ClassSet unseen_;
};

Dataset make_dataset(FeatureMatrix visual, FeatureMatrix test_visual, std::vector<SemanticTable> semantics,
                     ClassSet seen, ClassSet unseen);

/// Arithmetic mean of the rows of each class, accumulated in double.
SemanticTable class_prototypes(const FeatureMatrix& features, const ModalityId& modality = ModalityId{"P"});

/// Scales every row with nonzero norm to unit L2 norm; zero rows pass through.
FeatureMatrix l2_normalize_rows(const FeatureMatrix& m);

// ---------------------------------------------------------------------------
// File formats

enum class FileFormat { Binary, Csv };

/// ".csv" selects CSV; anything else is the binary layout.
FileFormat format_for_path(const std::filesystem::path& path);

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FileFormat format);
void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path, FileFormat format);

/// Semantic tables share the feature file layout, one row per class. Values
/// are narrowed to float32 on save.
SemanticTable load_semantic_table(const std::filesystem::path& path, const ModalityId& modality, FileFormat format);
void save_semantic_table(const SemanticTable& table, const std::filesystem::path& path, FileFormat format);

struct Split {
    ClassSet seen;
    ClassSet unseen;
};

Split load_split(const std::filesystem::path& path);
void save_split(const Split& split, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset directories
//
//   train.<ext>                 seen-class visual features
//   test.<ext>                  unseen-class visual features
//   split.txt
//   semantic_<TAG>.<ext>        per-class table, or
//   semantic_<TAG>.samples.<ext> per-sample features averaged into a table

struct DatasetLoadOptions {
    bool normalize_visual = false;
    bool normalize_semantics = false;
};

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir, FileFormat format = FileFormat::Binary);
Dataset load_dataset(const std::filesystem::path& dir, const DatasetLoadOptions& options = {});

}  // namespace zsl
