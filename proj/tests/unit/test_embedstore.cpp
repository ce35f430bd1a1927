#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "scprobe/embedstore.hpp"
#include "scprobe/random.hpp"
#include "scprobe/space.hpp"
#include "test_support.hpp"

using namespace scprobe;
using scprobe::testing::TempDir;

namespace {

std::vector<ContextOccurrence> occs(std::size_t n) {
    std::vector<ContextOccurrence> out;
    for (std::size_t i = 0; i < n; ++i) {
        ContextOccurrence o;
        o.occurrence_id = static_cast<std::int64_t>(10 + i);
        o.word = "w" + std::to_string(i % 3);
        o.sclass = static_cast<int>(i % 2);
        o.tokens = {o.word};
        o.split = i % 2 ? Split::test : Split::train;
        out.push_back(o);
    }
    return out;
}

LayerMatrix random_layer(const std::string& tag, std::size_t rows, std::size_t cols, std::uint64_t seed) {
    LayerMatrix m(tag, rows, cols);
    Rng rng(seed);
    for (auto& x : m.data) {
        x = static_cast<float>(standard_normal(rng));
    }
    return m;
}

std::uint32_t bits(float f) { return std::bit_cast<std::uint32_t>(f); }

}  // namespace

TEST(Store, ThreeByFourRoundTrip) {
    TempDir tmp;
    const auto manifest = make_manifest("ds", "enc@pretrained", {"L0"}, 4, occs(3));
    LayerMatrix m("L0", 3, 4);
    const float values[] = {1.5f, -2.25f, 0.1f, 3e-39f, 7.f, 8.f, -0.f, 1e30f, 9.f, 10.f, 11.f, 12.f};
    std::copy(std::begin(values), std::end(values), m.data.begin());
    write_store(tmp.path(), manifest, std::span(&m, 1));
    const auto row = read_row(tmp.path(), "L0", 1);
    ASSERT_EQ(row.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(bits(row[j]), bits(values[4 + j]));
    }
    EXPECT_EQ(std::filesystem::file_size(tmp / "L0.f32"), 3u * 4u * 4u);
}

TEST(Store, FileIsLittleEndianRowMajor) {
    TempDir tmp;
    const auto manifest = make_manifest("ds", "enc", {"wp"}, 2, occs(2));
    LayerMatrix m("wp", 2, 2);
    m.data = {1.0f, 2.0f, 3.0f, 4.0f};
    write_store(tmp.path(), manifest, std::span(&m, 1));
    const auto raw = scprobe::testing::slurp(tmp / "wp.f32");
    ASSERT_EQ(raw.size(), 16u);
    // 3.0f = 0x40400000, third float, little-endian
    EXPECT_EQ(static_cast<unsigned char>(raw[8]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(raw[11]), 0x40);
    EXPECT_EQ(static_cast<unsigned char>(raw[10]), 0x40);
}

TEST(Store, PropertyRoundTripIsBitIdentityAndValidates) {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        TempDir tmp;
        const auto rows = 1 + uniform_below(rng, 30);
        const auto dim = 1 + uniform_below(rng, 17);
        const auto n_layers = 1 + uniform_below(rng, 3);
        std::vector<std::string> tags;
        std::vector<LayerMatrix> layers;
        for (std::uint64_t l = 0; l < n_layers; ++l) {
            tags.push_back("L" + std::to_string(l));
            layers.push_back(random_layer(tags.back(), rows, dim, rng()));
        }
        const auto manifest = make_manifest("ds", "enc", tags, dim, occs(rows), trial % 2 ? std::optional<std::size_t>(4) : std::nullopt);
        write_store(tmp.path(), manifest, layers);
        const auto report = validate(tmp.path());
        EXPECT_TRUE(report.ok()) << report.issues.front().message;
        EXPECT_EQ(report.layers_checked, n_layers);
        const auto store = EmbeddingStore::open(tmp.path());
        EXPECT_EQ(store.manifest().records, manifest.records);
        EXPECT_EQ(store.manifest().context_size, manifest.context_size);
        for (std::uint64_t l = 0; l < n_layers; ++l) {
            const auto back = store.load_layer(tags[l]);
            ASSERT_EQ(back.data.size(), layers[l].data.size());
            EXPECT_EQ(std::memcmp(back.data.data(), layers[l].data.data(), back.data.size() * sizeof(float)), 0);
            const auto r = uniform_below(rng, rows);
            const auto row = store.read_row(tags[l], r);
            EXPECT_EQ(std::memcmp(row.data(), layers[l].row(r).data(), dim * sizeof(float)), 0);
        }
    }
}

TEST(Store, WriteErrorsAreDistinct) {
    TempDir tmp;
    const auto manifest = make_manifest("ds", "enc", {"L0", "L1"}, 4, occs(3));
    std::vector<LayerMatrix> only_one{random_layer("L0", 3, 4, 1)};
    EXPECT_SCPROBE_ERROR(write_store(tmp.path(), manifest, only_one), ErrorCode::missing_layer_file);

    std::vector<LayerMatrix> wrong_dim{random_layer("L0", 3, 4, 1), random_layer("L1", 3, 5, 2)};
    EXPECT_SCPROBE_ERROR(write_store(tmp.path(), manifest, wrong_dim), ErrorCode::dimension_mismatch);

    std::vector<LayerMatrix> wrong_rows{random_layer("L0", 3, 4, 1), random_layer("L1", 2, 4, 2)};
    EXPECT_SCPROBE_ERROR(write_store(tmp.path(), manifest, wrong_rows), ErrorCode::row_count_mismatch);

    std::vector<LayerMatrix> nan{random_layer("L0", 3, 4, 1), random_layer("L1", 3, 4, 2)};
    nan[1].row(2)[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_SCPROBE_ERROR(write_store(tmp.path(), manifest, nan), ErrorCode::non_finite);
    EXPECT_FALSE(std::filesystem::exists(tmp / "manifest.json"));
}

TEST(Store, ValidateReportsRowCountMismatch) {
    TempDir tmp;
    auto manifest = make_manifest("ds", "enc", {"L0"}, 4, occs(2));
    const auto m = random_layer("L0", 2, 4, 3);
    write_store(tmp.path(), manifest, std::span(&m, 1));
    // manifest now claims 3 rows while the matrix has 2
    manifest = make_manifest("ds", "enc", {"L0"}, 4, occs(3));
    scprobe::testing::spit(tmp / "manifest.json", manifest_to_json(manifest));
    const auto report = validate(tmp.path());
    ASSERT_EQ(report.issues.size(), 1u);
    EXPECT_EQ(report.issues[0].code, ErrorCode::row_count_mismatch);
    EXPECT_EQ(report.issues[0].layer_tag, "L0");
}

TEST(Store, ValidateLocatesFirstNaN) {
    TempDir tmp;
    const auto manifest = make_manifest("ds", "enc", {"L0", "L1"}, 5, occs(4));
    std::vector<LayerMatrix> layers{random_layer("L0", 4, 5, 1), random_layer("L1", 4, 5, 2)};
    write_store(tmp.path(), manifest, layers);
    {
        // corrupt L1 row 2 column 3, and a later cell
        std::fstream f(tmp / "L1.f32", std::ios::in | std::ios::out | std::ios::binary);
        const float nan = std::numeric_limits<float>::quiet_NaN();
        const float inf = std::numeric_limits<float>::infinity();
        f.seekp((2 * 5 + 3) * 4);
        f.write(reinterpret_cast<const char*>(&nan), 4);
        f.seekp((3 * 5 + 0) * 4);
        f.write(reinterpret_cast<const char*>(&inf), 4);
    }
    const auto report = validate(tmp.path());
    ASSERT_EQ(report.issues.size(), 1u);
    const auto& issue = report.issues[0];
    EXPECT_EQ(issue.code, ErrorCode::non_finite);
    EXPECT_EQ(issue.layer_tag, "L1");
    EXPECT_EQ(issue.row, 2u);
    EXPECT_EQ(issue.column, 3u);
    EXPECT_SCPROBE_ERROR(EmbeddingStore::open(tmp.path()).load_layer("L1"), ErrorCode::non_finite);
}

TEST(Store, ValidateMissingLayerAndBadWidth) {
    TempDir tmp;
    const auto manifest = make_manifest("ds", "enc", {"L0", "L1"}, 4, occs(3));
    std::vector<LayerMatrix> layers{random_layer("L0", 3, 4, 1), random_layer("L1", 3, 4, 2)};
    write_store(tmp.path(), manifest, layers);
    std::filesystem::remove(tmp / "L1.f32");
    {
        std::ofstream f(tmp / "L0.f32", std::ios::binary | std::ios::app);
        f.write("ab", 2);
    }
    const auto report = validate(tmp.path());
    ASSERT_EQ(report.issues.size(), 2u);
    EXPECT_EQ(report.issues[0].code, ErrorCode::dimension_mismatch);
    EXPECT_EQ(report.issues[1].code, ErrorCode::missing_layer_file);
}

TEST(Store, OpenMissingDirectoryIsMissingInput) {
    TempDir tmp;
    EXPECT_SCPROBE_ERROR(EmbeddingStore::open(tmp / "nope"), ErrorCode::missing_input);
    EXPECT_FALSE(validate(tmp / "nope").ok());
}

TEST(Manifest, JsonFieldNamesAreStable) {
    const auto manifest = make_manifest("wikipse", "bert@pretrained", {"wp", "L0"}, 8, occs(2), 2);
    const auto text = manifest_to_json(manifest);
    for (const char* key : {"\"dataset_id\"", "\"encoder_id\"", "\"layer_tags\"", "\"dim\"", "\"context_size\"",
                            "\"records\"", "\"row_index\"", "\"occurrence_id\"", "\"word\"", "\"sclass\"", "\"split\""}) {
        EXPECT_NE(text.find(key), std::string::npos) << key;
    }
    const auto back = manifest_from_json(text);
    EXPECT_EQ(back.records, manifest.records);
    EXPECT_EQ(back.context_size_label(), "2");
    const auto full = make_manifest("d", "e", {"L0"}, 8, occs(1));
    EXPECT_EQ(full.context_size_label(), "full");
    EXPECT_NE(manifest_to_json(full).find("\"full\""), std::string::npos);
}

TEST(Manifest, SameRecordsCheck) {
    const auto a = make_manifest("d", "pre", {"L0"}, 4, occs(3));
    auto b = make_manifest("d", "ft", {"L0"}, 4, occs(3));
    EXPECT_NO_THROW(require_same_records(a, b));
    std::swap(b.records[0].occurrence_id, b.records[1].occurrence_id);
    EXPECT_SCPROBE_ERROR(require_same_records(a, b), ErrorCode::record_mismatch);
    auto c = make_manifest("d", "ft", {"L1"}, 4, occs(3));
    EXPECT_SCPROBE_ERROR(require_same_records(a, c), ErrorCode::record_mismatch);
}

TEST(Attention, FileLayoutAndRoundTrip) {
    TempDir tmp;
    AttentionDump dump("ex7", 2, 3, 4);
    Rng rng(1);
    for (auto& x : dump.weights) {
        x = static_cast<float>(uniform_unit(rng));
    }
    write_attention(tmp / "ex7.attn", dump);
    EXPECT_EQ(std::filesystem::file_size(tmp / "ex7.attn"), 12u + 2u * 3u * 16u * 4u);
    const auto raw = scprobe::testing::slurp(tmp / "ex7.attn");
    EXPECT_EQ(raw[0], 2);
    EXPECT_EQ(raw[4], 3);
    EXPECT_EQ(raw[8], 4);
    const auto back = read_attention(tmp / "ex7.attn");
    EXPECT_EQ(back.example_id, "ex7");
    EXPECT_EQ(back.weights, dump.weights);
    // [layer][head][row][col]
    EXPECT_EQ(back.matrix(1, 2)[3 * 4 + 1], dump.weights[((1 * 3 + 2) * 4 + 3) * 4 + 1]);
}

TEST(Attention, TwelveByTwelveByNineShape) {
    TempDir tmp;
    AttentionDump dump("a", 12, 12, 9);
    write_attention(tmp / "a.attn", dump);
    EXPECT_EQ(std::filesystem::file_size(tmp / "a.attn"), 12u + 12u * 12u * 81u * 4u);
}

TEST(Attention, TruncatedFileIsRejected) {
    TempDir tmp;
    AttentionDump dump("a", 1, 1, 3);
    write_attention(tmp / "a.attn", dump);
    std::filesystem::resize_file(tmp / "a.attn", 20);
    EXPECT_SCPROBE_ERROR(read_attention(tmp / "a.attn"), ErrorCode::dimension_mismatch);
}

TEST(Attention, DirectoryIsSortedById) {
    TempDir tmp;
    for (const char* id : {"b", "c", "a"}) {
        write_attention(tmp / (std::string(id) + ".attn"), AttentionDump(id, 1, 1, 1));
    }
    scprobe::testing::spit(tmp / "notes.txt", "ignored");
    const auto dumps = read_attention_dir(tmp.path());
    ASSERT_EQ(dumps.size(), 3u);
    EXPECT_EQ(dumps[0].example_id, "a");
    EXPECT_EQ(dumps[2].example_id, "c");
}

TEST(Attention, RowStochasticCheck) {
    AttentionDump dump("x", 1, 2, 2);
    dump.weights = {0.5f, 0.5f, 1.0f, 0.0f, 0.3f, 0.7f, 0.2f, 0.8f};
    EXPECT_FALSE(check_row_stochastic(dump).has_value());
    dump.weights[7] = 0.7f;
    const auto issue = check_row_stochastic(dump);
    ASSERT_TRUE(issue.has_value());
    EXPECT_EQ(issue->row, 1u);
}

TEST(Space, SetReplacesAndReportsIt) {
    TypeLevelSpace s("s", 2);
    EXPECT_FALSE(s.set("a", std::vector<float>{1, 2}));
    EXPECT_TRUE(s.set("a", std::vector<float>{3, 4}));
    EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(s.at("a")[0], 3.0f);
    EXPECT_SCPROBE_ERROR(s.at("b"), ErrorCode::out_of_vocabulary);
    EXPECT_SCPROBE_ERROR(s.set("c", std::vector<float>{1}), ErrorCode::dimension_mismatch);
}

TEST(Neighbors, IdenticalVectorRanksFirst) {
    TypeLevelSpace s("s", 3);
    s.set("suit", std::vector<float>{1, 2, 3});
    s.set("suits", std::vector<float>{1, 2, 3});
    s.set("lawsuit", std::vector<float>{1, 2, 2});
    s.set("cat", std::vector<float>{-3, 0, 1});
    const auto nn = nearest_neighbors(s, "suit", 2);
    ASSERT_EQ(nn.size(), 2u);
    EXPECT_EQ(nn[0].word, "suits");
    EXPECT_NEAR(nn[0].similarity, 1.0, 1e-12);
    EXPECT_EQ(nn[1].word, "lawsuit");
}

TEST(Neighbors, FiveWordHandPlacedMatchesBruteForce) {
    TypeLevelSpace s("s", 2);
    const std::vector<std::pair<std::string, std::vector<float>>> rows{
        {"q", {1, 0}}, {"a", {1, 1}}, {"b", {0, 1}}, {"c", {-1, 0.5f}}, {"d", {2, 0.1f}}};
    for (const auto& [w, v] : rows) {
        s.set(w, v);
    }
    // hand: cos(q,d)=2/sqrt(4.01), cos(q,a)=1/sqrt2, cos(q,b)=0, cos(q,c)=-1/sqrt(1.25)
    const auto nn = nearest_neighbors(s, "q", 4);
    ASSERT_EQ(nn.size(), 4u);
    EXPECT_EQ(nn[0].word, "d");
    EXPECT_NEAR(nn[0].similarity, 2.0 / std::sqrt(4.01), 1e-6);
    EXPECT_EQ(nn[1].word, "a");
    EXPECT_NEAR(nn[1].similarity, 1.0 / std::sqrt(2.0), 1e-6);
    EXPECT_EQ(nn[2].word, "b");
    EXPECT_NEAR(nn[2].similarity, 0.0, 1e-12);
    EXPECT_EQ(nn[3].word, "c");
    EXPECT_NEAR(nn[3].similarity, -1.0 / std::sqrt(1.25), 1e-6);
}

TEST(Neighbors, PropertyScaleInvariantAndSorted) {
    Rng rng(17);
    TypeLevelSpace s("s", 6);
    for (int i = 0; i < 40; ++i) {
        std::vector<float> v(6);
        for (auto& x : v) {
            x = static_cast<float>(standard_normal(rng));
        }
        s.set("w" + std::to_string(i), v);
    }
    const auto q = s.at("w3");
    std::vector<float> scaled(q.begin(), q.end());
    for (auto& x : scaled) {
        x *= 7.5f;
    }
    const auto a = nearest_neighbors(s, "w3", 10);
    const auto b = nearest_neighbors(s, scaled, 10, "w3");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].word, b[i].word);
        EXPECT_NEAR(a[i].similarity, b[i].similarity, 1e-6);
        EXPECT_NE(a[i].word, "w3");
        if (i > 0) {
            EXPECT_GE(a[i - 1].similarity, a[i].similarity);
        }
    }
}

TEST(Neighbors, UnknownQueryIsError) {
    TypeLevelSpace s("s", 2);
    s.set("a", std::vector<float>{1, 0});
    EXPECT_SCPROBE_ERROR(nearest_neighbors(s, "zzz", 3), ErrorCode::out_of_vocabulary);
    EXPECT_EQ(nearest_neighbors(s, "a", 3).size(), 0u);
}
