#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "zsl/data_model.hpp"
#include "zsl/error.hpp"

using namespace zsl;

namespace {

FeatureMatrix make_matrix(std::vector<std::vector<float>> rows, std::vector<ClassId> labels) {
    FeatureMatrix::Storage m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return {m, std::move(labels)};
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

template <typename Fn>
std::string error_of(Fn fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "<no error>";
}

SemanticTable table(const std::string& tag, const ClassSet& classes, std::size_t dim = 3) {
    std::map<ClassId, Eigen::VectorXd> v;
    for (ClassId c : classes) v[c] = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), static_cast<double>(c));
    return {tag, v};
}

ClassSet range(ClassId lo, ClassId hi) {
    ClassSet s;
    for (ClassId c = lo; c < hi; ++c) s.insert(c);
    return s;
}

}  // namespace

TEST(FeatureFiles, ParsesTwoByThreeCsv) {
    auto dir = oracle::temp_dir("csv");
    write(dir / "m.csv", "0,1.0,2.0,3.0\n1,4.0,5.0,6.0");
    auto m = load_feature_matrix(dir / "m.csv", FileFormat::Csv);
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.dim(), 3u);
    EXPECT_EQ(m.labels(), (std::vector<ClassId>{0, 1}));
    EXPECT_FLOAT_EQ(m.values()(1, 2), 6.0f);
}

TEST(FeatureFiles, EmptyFileIsMalformedHeader) {
    auto dir = oracle::temp_dir("empty");
    write(dir / "e.csv", "");
    write(dir / "e.zslf", "");
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "e.csv", FileFormat::Csv); }).find("malformed header"), std::string::npos);
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "e.zslf", FileFormat::Binary); }).find("malformed header"), std::string::npos);
}

TEST(FeatureFiles, BinaryNaNRejectedWithRowIndex) {
    auto dir = oracle::temp_dir("nan");
    std::string bytes = "ZSLF";
    auto put = [&](std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put(1, 4);  // version
    put(1, 8);  // rows
    put(2, 8);  // dim
    put(7, 8);  // label
    put(std::bit_cast<std::uint32_t>(1.0f), 4);
    put(std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN()), 4);
    write(dir / "nan.zslf", bytes);
    EXPECT_EQ(error_of([&] { load_feature_matrix(dir / "nan.zslf", FileFormat::Binary); }), "non-finite value at row 0");
}

TEST(FeatureFiles, CsvErrorsCarryRowIndex) {
    auto dir = oracle::temp_dir("csverr");
    write(dir / "dim.csv", "0,1,2\n1,3\n");
    write(dir / "inf.csv", "0,1,2\n1,3,inf\n");
    write(dir / "label.csv", "x,1,2\n");
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "dim.csv", FileFormat::Csv); }).find("dimension mismatch at row 1"), std::string::npos);
    EXPECT_EQ(error_of([&] { load_feature_matrix(dir / "inf.csv", FileFormat::Csv); }), "non-finite value at row 1");
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "label.csv", FileFormat::Csv); }).find("malformed label at row 0"), std::string::npos);
    EXPECT_THROW(load_feature_matrix(dir / "missing.csv", FileFormat::Csv), IoError);
}

TEST(FeatureFiles, BinaryHeaderErrors) {
    auto dir = oracle::temp_dir("binerr");
    auto m = make_matrix({{1, 2}, {3, 4}}, {0, 1});
    save_feature_matrix(m, dir / "ok.zslf", FileFormat::Binary);
    std::ifstream in(dir / "ok.zslf", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});

    write(dir / "magic.zslf", "ZZZZ" + bytes.substr(4));
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "magic.zslf", FileFormat::Binary); }).find("malformed header"), std::string::npos);

    std::string v = bytes;
    v[4] = 2;
    write(dir / "version.zslf", v);
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "version.zslf", FileFormat::Binary); }).find("unsupported version"), std::string::npos);

    write(dir / "short.zslf", bytes.substr(0, bytes.size() - 3));
    EXPECT_NE(error_of([&] { load_feature_matrix(dir / "short.zslf", FileFormat::Binary); }).find("dimension mismatch"), std::string::npos);
}

TEST(FeatureFiles, BinaryRoundTripIsBitExact) {
    std::mt19937 gen(11);
    std::uniform_real_distribution<float> u(-1e3f, 1e3f);
    for (int trial = 0; trial < 5; ++trial) {
        const int rows = 1 + trial * 7, dim = 1 + trial * 3;
        FeatureMatrix::Storage s(rows, dim);
        std::vector<ClassId> labels;
        for (int r = 0; r < rows; ++r) {
            labels.push_back(static_cast<ClassId>(gen() % 1000));
            for (int c = 0; c < dim; ++c) s(r, c) = u(gen);
        }
        s(0, 0) = -0.0f;
        s(rows - 1, dim - 1) = std::numeric_limits<float>::denorm_min();
        FeatureMatrix m(s, labels);
        auto dir = oracle::temp_dir("rt");
        save_feature_matrix(m, dir / "m.zslf", FileFormat::Binary);
        EXPECT_TRUE(load_feature_matrix(dir / "m.zslf", FileFormat::Binary) == m);
        save_feature_matrix(m, dir / "m.csv", FileFormat::Csv);
        EXPECT_TRUE(load_feature_matrix(dir / "m.csv", FileFormat::Csv) == m);
    }
}

TEST(FeatureMatrix, ConstructorEnforcesInvariants) {
    FeatureMatrix::Storage s(1, 2);
    s << 1.0f, std::numeric_limits<float>::infinity();
    EXPECT_THROW(FeatureMatrix(s, {0}), InvariantError);
    FeatureMatrix::Storage ok(1, 2);
    ok << 1.0f, 2.0f;
    EXPECT_THROW(FeatureMatrix(ok, {0, 1}), InvariantError);
    EXPECT_THROW(FeatureMatrix(FeatureMatrix::Storage(1, 0), {0}), InvariantError);
}

TEST(ClassPrototypes, SpecExamples) {
    auto a = class_prototypes(make_matrix({{1, 3}, {3, 1}}, {0, 0}));
    EXPECT_EQ(a.at(0), Eigen::Vector2d(2, 2));
    auto b = class_prototypes(make_matrix({{5, 5, 5}}, {1}));
    EXPECT_EQ(b.at(1), Eigen::Vector3d(5, 5, 5));
    auto c = class_prototypes(make_matrix({{1, 0}, {0, 1}, {4, 4}}, {0, 0, 1}));
    EXPECT_EQ(c.vectors().size(), 2u);
    EXPECT_EQ(c.at(0), Eigen::Vector2d(0.5, 0.5));
    EXPECT_EQ(c.at(1), Eigen::Vector2d(4, 4));
    EXPECT_THROW(class_prototypes(FeatureMatrix(FeatureMatrix::Storage(0, 2), {})), InvariantError);
}

TEST(ClassPrototypes, MatchesBruteForceAndIsPermutationInvariant) {
    std::mt19937 gen(5);
    std::uniform_real_distribution<float> u(-10.f, 10.f);
    const int rows = 200, dim = 7;
    std::vector<std::vector<float>> data(rows, std::vector<float>(dim));
    std::vector<ClassId> labels(rows);
    for (int r = 0; r < rows; ++r) {
        labels[r] = gen() % 9;
        for (auto& v : data[r]) v = u(gen);
    }
    auto protos = class_prototypes(make_matrix(data, labels));
    for (const auto& [c, mean] : protos.vectors()) {
        for (int j = 0; j < dim; ++j) {
            long double sum = 0;
            int count = 0;
            for (int r = 0; r < rows; ++r) {
                if (labels[r] == c) {
                    sum += data[r][j];
                    ++count;
                }
            }
            const double expected = static_cast<double>(sum / count);
            EXPECT_NEAR(mean[j], expected, 1e-9 * std::max(1.0, std::abs(expected)));
        }
    }
    std::vector<int> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<std::vector<float>> pd;
    std::vector<ClassId> pl;
    for (int i : perm) {
        pd.push_back(data[i]);
        pl.push_back(labels[i]);
    }
    auto shuffled = class_prototypes(make_matrix(pd, pl));
    for (const auto& [c, mean] : protos.vectors()) {
        EXPECT_LE((shuffled.at(c) - mean).norm(), 1e-12 * mean.norm() + 1e-12);
    }
}

TEST(Normalize, SpecExamplesAndIdempotence) {
    auto m = l2_normalize_rows(make_matrix({{3, 4}, {0, 0}}, {0, 1}));
    EXPECT_FLOAT_EQ(m.values()(0, 0), 0.6f);
    EXPECT_FLOAT_EQ(m.values()(0, 1), 0.8f);
    EXPECT_EQ(m.values()(1, 0), 0.0f);
    EXPECT_EQ(m.values()(1, 1), 0.0f);
    auto q = l2_normalize_rows(make_matrix({{1, 1, 1, 1}}, {0}));
    for (int j = 0; j < 4; ++j) EXPECT_FLOAT_EQ(q.values()(0, j), 0.5f);

    std::mt19937 gen(3);
    std::uniform_real_distribution<float> u(-5.f, 5.f);
    std::vector<std::vector<float>> rows(30, std::vector<float>(6));
    for (auto& r : rows)
        for (auto& v : r) v = u(gen);
    auto once = l2_normalize_rows(make_matrix(rows, std::vector<ClassId>(30, 0)));
    auto twice = l2_normalize_rows(once);
    for (Eigen::Index r = 0; r < 30; ++r) {
        EXPECT_NEAR(once.values().row(r).cast<double>().norm(), 1.0, 1e-6);
        for (Eigen::Index c = 0; c < 6; ++c) EXPECT_NEAR(twice.values()(r, c), once.values()(r, c), 1e-6);
    }
}

TEST(MakeDataset, FullSizeSplitIsAccepted) {
    auto seen = range(0, 144);
    auto unseen = range(144, 174);
    std::vector<ClassId> train_labels(seen.begin(), seen.end());
    std::vector<ClassId> test_labels(unseen.begin(), unseen.end());
    FeatureMatrix train(FeatureMatrix::Storage::Ones(144, 4), train_labels);
    FeatureMatrix test(FeatureMatrix::Storage::Ones(30, 4), test_labels);
    ClassSet all = range(0, 174);
    auto ds = make_dataset(train, test, {table("W", all), table("C", all)}, seen, unseen);
    EXPECT_EQ(ds.seen_classes().size(), 144u);
    EXPECT_EQ(ds.unseen_classes().size(), 30u);
    EXPECT_EQ(modality_set_name(ds.modalities()), "W+C");
}

TEST(MakeDataset, RejectsInvalidSplitsAndCoverage) {
    FeatureMatrix one(FeatureMatrix::Storage::Ones(1, 3), {0});
    EXPECT_NE(error_of([&] { make_dataset(one, one, {table("W", {0})}, {0}, {0}); }).find("splits overlap"), std::string::npos);

    auto seen = range(0, 144);
    auto unseen = range(144, 174);
    FeatureMatrix train(FeatureMatrix::Storage::Ones(1, 3), {0});
    FeatureMatrix test(FeatureMatrix::Storage::Ones(1, 3), {144});
    EXPECT_EQ(error_of([&] { make_dataset(train, test, {table("W", seen)}, seen, unseen); }),
              "class 144 missing from modality W");

    // Sample labeled outside its split.
    FeatureMatrix bad_test(FeatureMatrix::Storage::Ones(1, 3), {3});
    auto all = range(0, 174);
    EXPECT_NE(error_of([&] { make_dataset(train, bad_test, {table("W", all)}, seen, unseen); }).find("outside the unseen split"),
              std::string::npos);

    // Modality with an extra class is rejected rather than silently subset.
    auto extra = all;
    extra.insert(999);
    EXPECT_NE(error_of([&] { make_dataset(train, test, {table("W", extra)}, seen, unseen); }).find("not part of the split"),
              std::string::npos);
}

TEST(DatasetFiles, SplitFileAndDirectoryRoundTrip) {
    auto dir = oracle::temp_dir("ds");
    write(dir / "split.txt", "seen: 0 1 2\nunseen: 3 4\n");
    auto split = load_split(dir / "split.txt");
    EXPECT_EQ(split.seen, (ClassSet{0, 1, 2}));
    EXPECT_EQ(split.unseen, (ClassSet{3, 4}));
    write(dir / "bad.txt", "seen: 0 1\n");
    EXPECT_THROW(load_split(dir / "bad.txt"), FormatError);

    ClassSet all{0, 1, 2, 3, 4};
    FeatureMatrix train(FeatureMatrix::Storage::Constant(3, 2, 0.25f), {0, 1, 2});
    FeatureMatrix test(FeatureMatrix::Storage::Constant(2, 2, 0.5f), {3, 4});
    auto ds = make_dataset(train, test, {table("W", all), table("T", all, 2)}, split.seen, split.unseen);
    auto out = dir / "saved";
    save_dataset(ds, out);
    auto back = load_dataset(out);
    EXPECT_TRUE(back.visual() == ds.visual());
    EXPECT_TRUE(back.test_visual() == ds.test_visual());
    EXPECT_EQ(back.semantic("T").at(4), ds.semantic("T").at(4));

    // Per-sample modality features become a table through class_prototypes.
    std::filesystem::remove(out / "semantic_T.zslf");
    FeatureMatrix samples(FeatureMatrix::Storage::Ones(10, 2), {0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
    save_feature_matrix(samples, out / "semantic_T.samples.zslf", FileFormat::Binary);
    auto derived = load_dataset(out);
    EXPECT_EQ(derived.semantic("T").at(3), Eigen::Vector2d(1, 1));
}

TEST(Modality, CanonicalOrderAndParsing) {
    auto s = parse_modality_set("T,I+W , C,Z");
    EXPECT_EQ(modality_set_name(s), "W+C+I+T+Z");
    EXPECT_THROW(parse_modality_set(" , "), ConfigError);
}
