#include "zsl/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "binary_io.hpp"
#include "zsl/error.hpp"

namespace zsl {

namespace {

constexpr char kFeatureMagic[] = "ZSLF";
constexpr std::uint32_t kFeatureVersion = 1;

int builtin_rank(const std::string& tag) {
    static const char* const order[] = {"W", "C", "I", "T"};
    for (int i = 0; i < 4; ++i) {
        if (tag == order[i]) return i;
    }
    return 4;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Labels plus float rows, the common shape of every feature-style file.
struct RawRows {
    std::vector<ClassId> labels;
    FeatureMatrix::Storage values;
};

RawRows read_binary_rows(const std::filesystem::path& path) {
    auto data = detail::read_file(path);
    detail::ByteReader in(data, "malformed header: " + path.string());
    if (data.empty() || in.bytes(4) != std::string_view(kFeatureMagic, 4)) {
        throw FormatError("malformed header: bad magic in " + path.string());
    }
    auto version = in.le<std::uint32_t>();
    if (version != kFeatureVersion) {
        throw FormatError("unsupported version " + std::to_string(version) + " in " + path.string());
    }
    auto rows = in.le<std::uint64_t>();
    auto dim = in.le<std::uint64_t>();
    if (dim == 0) throw FormatError("malformed header: zero dimension in " + path.string());
    // Guard the size arithmetic before trusting rows*dim.
    if (rows > in.remaining() / 8 || (rows > 0 && dim > in.remaining() / (4 * rows))) {
        throw FormatError("dimension mismatch: header declares more data than " + path.string() + " holds");
    }
    const std::size_t expected = rows * 8 + rows * dim * 4;
    if (in.remaining() != expected) {
        throw FormatError("dimension mismatch: payload of " + path.string() + " has " +
                          std::to_string(in.remaining()) + " bytes, header implies " + std::to_string(expected));
    }
    RawRows out;
    out.labels.resize(rows);
    for (auto& l : out.labels) l = in.le<std::uint64_t>();
    out.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
    for (std::uint64_t r = 0; r < rows; ++r) {
        for (std::uint64_t c = 0; c < dim; ++c) {
            float v = in.f32();
            if (!std::isfinite(v)) throw FormatError("non-finite value at row " + std::to_string(r));
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return out;
}

void write_binary_rows(const std::vector<ClassId>& labels, const FeatureMatrix::Storage& values,
                       const std::filesystem::path& path) {
    detail::ByteWriter out;
    out.bytes(std::string_view(kFeatureMagic, 4));
    out.le<std::uint32_t>(kFeatureVersion);
    out.le<std::uint64_t>(static_cast<std::uint64_t>(values.rows()));
    out.le<std::uint64_t>(static_cast<std::uint64_t>(values.cols()));
    for (auto l : labels) out.le<std::uint64_t>(l);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) out.f32(values(r, c));
    }
    detail::write_file(path, out.data());
}

RawRows read_csv_rows(const std::filesystem::path& path) {
    std::string text = detail::read_text_file(path);
    std::istringstream in(text);
    std::vector<ClassId> labels;
    std::vector<std::vector<float>> rows;
    std::string line;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const std::size_t r = rows.size();
        std::vector<std::string_view> fields;
        std::string_view rest(trimmed);
        while (true) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < 2) {
            throw FormatError("malformed row " + std::to_string(r) + ": expected label and at least one value");
        }
        std::string label_text = trim(fields[0]);
        ClassId label = 0;
        auto [lp, lec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
        if (lec != std::errc{} || lp != label_text.data() + label_text.size()) {
            throw FormatError("malformed label at row " + std::to_string(r));
        }
        std::vector<float> values;
        values.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            std::string field = trim(fields[i]);
            // std::from_chars parses nan/inf too; those are rejected below.
            float v = 0.0f;
            auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || p != field.data() + field.size()) {
                throw FormatError("malformed value at row " + std::to_string(r) + ", column " + std::to_string(i));
            }
            if (!std::isfinite(v)) throw FormatError("non-finite value at row " + std::to_string(r));
            values.push_back(v);
        }
        if (rows.empty()) {
            dim = values.size();
        } else if (values.size() != dim) {
            throw FormatError("dimension mismatch at row " + std::to_string(r) + ": expected " + std::to_string(dim) +
                              " values, found " + std::to_string(values.size()));
        }
        labels.push_back(label);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw FormatError("malformed header: empty file " + path.string());
    RawRows out;
    out.labels = std::move(labels);
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return out;
}

void write_csv_rows(const std::vector<ClassId>& labels, const FeatureMatrix::Storage& values,
                    const std::filesystem::path& path) {
    std::string text;
    char buf[64];
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        text += std::to_string(labels[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            // Shortest round-trip form keeps CSV saves lossless for float32.
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), values(r, c));
            text += ',';
            text.append(buf, end);
        }
        text += '\n';
    }
    detail::write_text_file(path, text);
}

RawRows read_rows(const std::filesystem::path& path, FileFormat format) {
    return format == FileFormat::Binary ? read_binary_rows(path) : read_csv_rows(path);
}

void write_rows(const std::vector<ClassId>& labels, const FeatureMatrix::Storage& values,
                const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::Binary) {
        write_binary_rows(labels, values, path);
    } else {
        write_csv_rows(labels, values, path);
    }
}

std::string extension_for(FileFormat format) { return format == FileFormat::Binary ? ".zslf" : ".csv"; }

SemanticTable normalized(const SemanticTable& table) {
    std::map<ClassId, Eigen::VectorXd> out;
    for (const auto& [c, v] : table.vectors()) {
        double n = v.norm();
        out.emplace(c, n > 0.0 ? Eigen::VectorXd(v / n) : v);
    }
    return {table.modality(), std::move(out)};
}

}  // namespace

// ---------------------------------------------------------------------------

ModalityId::ModalityId(std::string tag) : tag_(std::move(tag)), rank_(builtin_rank(tag_)) {
    if (tag_.empty()) throw ConfigError("empty modality tag");
}

std::strong_ordering ModalityId::operator<=>(const ModalityId& other) const {
    if (auto c = rank_ <=> other.rank_; c != 0) return c;
    return tag_ <=> other.tag_;
}

std::string modality_set_name(const ModalitySet& set) {
    std::string out;
    for (const auto& m : set) {
        if (!out.empty()) out += '+';
        out += m.tag();
    }
    return out;
}

ModalitySet parse_modality_set(const std::string& text) {
    ModalitySet out;
    std::string token;
    for (char ch : text + ",") {
        if (ch == ',' || ch == '+') {
            std::string t = trim(token);
            if (!t.empty()) out.insert(ModalityId(t));
            token.clear();
        } else {
            token += ch;
        }
    }
    if (out.empty()) throw ConfigError("empty modality set '" + text + "'");
    return out;
}

// ---------------------------------------------------------------------------

FeatureMatrix::FeatureMatrix(Storage values, std::vector<ClassId> labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
    if (values_.cols() == 0) throw InvariantError("feature matrix must have dim > 0");
    if (labels_.size() != rows()) {
        throw InvariantError("feature matrix has " + std::to_string(rows()) + " rows but " +
                             std::to_string(labels_.size()) + " labels");
    }
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
        if (!values_.row(r).allFinite()) throw InvariantError("non-finite value at row " + std::to_string(r));
    }
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
    if (labels_ != other.labels_ || values_.rows() != other.values_.rows() || values_.cols() != other.values_.cols()) {
        return false;
    }
    // Bitwise comparison: -0.0 and 0.0 differ on disk.
    return std::memcmp(values_.data(), other.values_.data(), sizeof(float) * static_cast<std::size_t>(values_.size())) == 0;
}

SemanticTable::SemanticTable(ModalityId modality, std::map<ClassId, Eigen::VectorXd> vectors)
    : modality_(std::move(modality)), vectors_(std::move(vectors)) {
    if (vectors_.empty()) throw InvariantError("semantic table for modality " + modality_.tag() + " is empty");
    dim_ = static_cast<std::size_t>(vectors_.begin()->second.size());
    if (dim_ == 0) throw InvariantError("semantic table for modality " + modality_.tag() + " has dim 0");
    for (const auto& [c, v] : vectors_) {
        if (static_cast<std::size_t>(v.size()) != dim_) {
            throw InvariantError("class " + std::to_string(c) + " in modality " + modality_.tag() +
                                 " has dim " + std::to_string(v.size()) + ", expected " + std::to_string(dim_));
        }
        if (!v.allFinite()) {
            throw InvariantError("non-finite value for class " + std::to_string(c) + " in modality " + modality_.tag());
        }
    }
}

const Eigen::VectorXd& SemanticTable::at(ClassId c) const {
    auto it = vectors_.find(c);
    if (it == vectors_.end()) {
        throw InvariantError("class " + std::to_string(c) + " missing from modality " + modality_.tag());
    }
    return it->second;
}

// ---------------------------------------------------------------------------

Dataset::Dataset(FeatureMatrix visual, FeatureMatrix test_visual, std::vector<SemanticTable> semantics, ClassSet seen,
                 ClassSet unseen)
    : visual_(std::move(visual)),
      test_visual_(std::move(test_visual)),
      semantics_(std::move(semantics)),
      seen_(std::move(seen)),
      unseen_(std::move(unseen)) {}

const SemanticTable& Dataset::semantic(const ModalityId& modality) const {
    for (const auto& t : semantics_) {
        if (t.modality() == modality) return t;
    }
    throw InvariantError("dataset has no modality " + modality.tag());
}

ModalitySet Dataset::modalities() const {
    ModalitySet out;
    for (const auto& t : semantics_) out.insert(t.modality());
    return out;
}

Dataset make_dataset(FeatureMatrix visual, FeatureMatrix test_visual, std::vector<SemanticTable> semantics,
                     ClassSet seen, ClassSet unseen) {
    for (ClassId c : seen) {
        if (unseen.count(c)) throw InvariantError("splits overlap: class " + std::to_string(c) + " is both seen and unseen");
    }
    if (seen.empty()) throw InvariantError("seen split is empty");
    if (unseen.empty()) throw InvariantError("unseen split is empty");
    if (visual.dim() != test_visual.dim()) {
        throw DimensionError("train features have dim " + std::to_string(visual.dim()) + " but test features have dim " +
                             std::to_string(test_visual.dim()));
    }
    for (std::size_t i = 0; i < visual.rows(); ++i) {
        if (!seen.count(visual.labels()[i])) {
            throw InvariantError("training sample " + std::to_string(i) + " labeled with class " +
                                 std::to_string(visual.labels()[i]) + " outside the seen split");
        }
    }
    for (std::size_t i = 0; i < test_visual.rows(); ++i) {
        if (!unseen.count(test_visual.labels()[i])) {
            throw InvariantError("test sample " + std::to_string(i) + " labeled with class " +
                                 std::to_string(test_visual.labels()[i]) + " outside the unseen split");
        }
    }
    if (semantics.empty()) throw InvariantError("dataset needs at least one semantic table");
    ModalitySet tags;
    for (const auto& table : semantics) {
        if (!tags.insert(table.modality()).second) {
            throw InvariantError("duplicate modality " + table.modality().tag());
        }
        for (const ClassSet* split : {&seen, &unseen}) {
            for (ClassId c : *split) {
                if (!table.covers(c)) {
                    throw InvariantError("class " + std::to_string(c) + " missing from modality " + table.modality().tag());
                }
            }
        }
        for (const auto& [c, v] : table.vectors()) {
            if (!seen.count(c) && !unseen.count(c)) {
                throw InvariantError("class " + std::to_string(c) + " in modality " + table.modality().tag() +
                                     " is not part of the split");
            }
        }
    }
    std::sort(semantics.begin(), semantics.end(),
              [](const SemanticTable& a, const SemanticTable& b) { return a.modality() < b.modality(); });
    return Dataset(std::move(visual), std::move(test_visual), std::move(semantics), std::move(seen), std::move(unseen));
}

SemanticTable class_prototypes(const FeatureMatrix& features, const ModalityId& modality) {
    if (features.rows() == 0) throw InvariantError("class_prototypes: empty input");
    std::map<ClassId, std::pair<Eigen::VectorXd, std::size_t>> acc;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto [it, inserted] = acc.try_emplace(features.labels()[i], Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.dim())), 0);
        it->second.first += features.row(i);
        ++it->second.second;
    }
    std::map<ClassId, Eigen::VectorXd> means;
    for (auto& [c, sum_count] : acc) {
        means.emplace(c, sum_count.first / static_cast<double>(sum_count.second));
    }
    return {modality, std::move(means)};
}

FeatureMatrix l2_normalize_rows(const FeatureMatrix& m) {
    FeatureMatrix::Storage out = m.values();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        Eigen::VectorXd row = out.row(r).cast<double>().transpose();
        double n = row.norm();
        if (n > 0.0) out.row(r) = (row / n).cast<float>().transpose();
    }
    return {std::move(out), m.labels()};
}

// ---------------------------------------------------------------------------

FileFormat format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? FileFormat::Csv : FileFormat::Binary;
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FileFormat format) {
    if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
    auto raw = read_rows(path, format);
    return {std::move(raw.values), std::move(raw.labels)};
}

void save_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path, FileFormat format) {
    write_rows(m.labels(), m.values(), path, format);
}

SemanticTable load_semantic_table(const std::filesystem::path& path, const ModalityId& modality, FileFormat format) {
    if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
    auto raw = read_rows(path, format);
    std::map<ClassId, Eigen::VectorXd> vectors;
    for (std::size_t r = 0; r < raw.labels.size(); ++r) {
        Eigen::VectorXd v = raw.values.row(static_cast<Eigen::Index>(r)).cast<double>().transpose();
        if (!vectors.emplace(raw.labels[r], std::move(v)).second) {
            throw FormatError("duplicate class " + std::to_string(raw.labels[r]) + " in semantic table " + path.string());
        }
    }
    return {modality, std::move(vectors)};
}

void save_semantic_table(const SemanticTable& table, const std::filesystem::path& path, FileFormat format) {
    std::vector<ClassId> labels;
    FeatureMatrix::Storage values(static_cast<Eigen::Index>(table.vectors().size()), static_cast<Eigen::Index>(table.dim()));
    Eigen::Index r = 0;
    for (const auto& [c, v] : table.vectors()) {
        labels.push_back(c);
        values.row(r++) = v.cast<float>().transpose();
    }
    write_rows(labels, values, path, format);
}

Split load_split(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
    std::istringstream in(detail::read_text_file(path));
    Split split;
    bool have_seen = false;
    bool have_unseen = false;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        auto colon = t.find(':');
        if (colon == std::string::npos) throw FormatError("malformed split line '" + t + "'");
        std::string key = trim(std::string_view(t).substr(0, colon));
        ClassSet* target = nullptr;
        if (key == "seen") {
            target = &split.seen;
            have_seen = true;
        } else if (key == "unseen") {
            target = &split.unseen;
            have_unseen = true;
        } else {
            throw FormatError("unknown split key '" + key + "'");
        }
        std::istringstream ids(t.substr(colon + 1));
        std::string tok;
        while (ids >> tok) {
            ClassId c = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), c);
            if (ec != std::errc{} || p != tok.data() + tok.size()) throw FormatError("malformed class id '" + tok + "' in split");
            target->insert(c);
        }
    }
    if (!have_seen || !have_unseen) throw FormatError("split file needs both 'seen:' and 'unseen:' lines");
    return split;
}

void save_split(const Split& split, const std::filesystem::path& path) {
    std::string text = "seen:";
    for (ClassId c : split.seen) text += " " + std::to_string(c);
    text += "\nunseen:";
    for (ClassId c : split.unseen) text += " " + std::to_string(c);
    text += "\n";
    detail::write_text_file(path, text);
}

// ---------------------------------------------------------------------------

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir, FileFormat format) {
    std::filesystem::create_directories(dir);
    const std::string ext = extension_for(format);
    save_feature_matrix(dataset.visual(), dir / ("train" + ext), format);
    save_feature_matrix(dataset.test_visual(), dir / ("test" + ext), format);
    save_split({dataset.seen_classes(), dataset.unseen_classes()}, dir / "split.txt");
    for (const auto& table : dataset.semantics()) {
        save_semantic_table(table, dir / ("semantic_" + table.modality().tag() + ext), format);
    }
}

Dataset load_dataset(const std::filesystem::path& dir, const DatasetLoadOptions& options) {
    if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
    auto pick = [&](const std::string& stem) -> std::filesystem::path {
        for (const char* ext : {".zslf", ".csv"}) {
            auto p = dir / (stem + ext);
            if (std::filesystem::exists(p)) return p;
        }
        throw IoError("dataset directory " + dir.string() + " has no " + stem + ".zslf or " + stem + ".csv");
    };
    auto train_path = pick("train");
    auto test_path = pick("test");
    FeatureMatrix visual = load_feature_matrix(train_path, format_for_path(train_path));
    FeatureMatrix test_visual = load_feature_matrix(test_path, format_for_path(test_path));
    Split split = load_split(dir / "split.txt");

    // Directory iteration order is unspecified; collect then sort.
    std::vector<std::filesystem::path> entries;
    for (const auto& e : std::filesystem::directory_iterator(dir)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());

    std::vector<SemanticTable> semantics;
    const std::string prefix = "semantic_";
    for (const auto& p : entries) {
        std::string name = p.filename().string();
        auto ext = p.extension().string();
        if (name.rfind(prefix, 0) != 0 || (ext != ".zslf" && ext != ".csv")) continue;
        std::string stem = p.stem().string().substr(prefix.size());
        const std::string samples_suffix = ".samples";
        if (stem.size() > samples_suffix.size() && stem.ends_with(samples_suffix)) {
            ModalityId tag(stem.substr(0, stem.size() - samples_suffix.size()));
            semantics.push_back(class_prototypes(load_feature_matrix(p, format_for_path(p)), tag));
        } else {
            semantics.push_back(load_semantic_table(p, ModalityId(stem), format_for_path(p)));
        }
    }
    if (options.normalize_visual) {
        visual = l2_normalize_rows(visual);
        test_visual = l2_normalize_rows(test_visual);
    }
    if (options.normalize_semantics) {
        for (auto& t : semantics) t = normalized(t);
    }
    return make_dataset(std::move(visual), std::move(test_visual), std::move(semantics), std::move(split.seen),
                        std::move(split.unseen));
}

}  // namespace zsl
