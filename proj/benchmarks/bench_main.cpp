// Microbenchmarks for the hot paths: probe forward/backward, Adam, micro-F1,
// nearest neighbours and store reads.
#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "scprobe/eval.hpp"
#include "scprobe/probe.hpp"
#include "scprobe/space.hpp"
#include "scprobe/synthetic.hpp"

namespace {

using scprobe::RowMatrix;

RowMatrix<float> random_batch(std::size_t rows, std::size_t dim, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<float> nd;
    RowMatrix<float> x(rows, dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = nd(gen);
    }
    return x;
}

std::vector<std::uint8_t> random_labels(std::size_t n) {
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<std::uint8_t>(i % 3 == 0);
    }
    return y;
}

// args: dim_in, hidden; batch of 256 as in training
void BM_ProbeForward(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const auto hidden = static_cast<std::size_t>(state.range(1));
    const auto probe = scprobe::init_probe<float>(0, dim, hidden, 1);
    const auto x = random_batch(256, dim, 2);
    for (auto _ : state) {
        auto logits = scprobe::batch_logits<float>(probe, x);
        benchmark::DoNotOptimize(logits.data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ProbeForward)->Args({768, 1024})->Args({1024, 1024})->Args({300, 1024});

void BM_ProbeBackward(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const auto hidden = static_cast<std::size_t>(state.range(1));
    const auto probe = scprobe::init_probe<float>(0, dim, hidden, 1);
    const auto x = random_batch(256, dim, 2);
    const auto y = random_labels(256);
    auto grads = scprobe::MlpParameters<float>::zeros(dim, hidden);
    for (auto _ : state) {
        benchmark::DoNotOptimize(scprobe::loss_and_gradients<float>(probe, x, y, grads));
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ProbeBackward)->Args({768, 1024})->Args({1024, 1024});

void BM_AdamStep(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    auto probe = scprobe::init_probe<float>(0, dim, 1024, 1);
    auto adam = scprobe::AdamState<float>::for_shape(dim, 1024);
    auto grads = scprobe::MlpParameters<float>::zeros(dim, 1024);
    grads.w1.setConstant(1e-3f);
    for (auto _ : state) {
        scprobe::adam_step(probe.params, adam, grads, scprobe::AdamConfig{});
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(probe.params.parameter_count()));
}
BENCHMARK(BM_AdamStep)->Arg(768);

void BM_MicroF1(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<scprobe::Decision> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i].class_index = static_cast<int>(i % 34);
        d[i].gold = i % 7 == 0;
        d[i].predicted = i % 5 == 0;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(scprobe::micro_f1(d).f1);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_MicroF1)->Arg(34 * 1000)->Arg(34 * 100000);

void BM_NearestNeighbors(benchmark::State& state) {
    const auto words = static_cast<std::size_t>(state.range(0));
    const std::size_t dim = 300;
    scprobe::TypeLevelSpace space("bench", dim);
    const auto m = random_batch(words, dim, 3);
    for (std::size_t i = 0; i < words; ++i) {
        space.set("w" + std::to_string(i), std::span<const float>(m.row(static_cast<Eigen::Index>(i)).data(), dim));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(scprobe::nearest_neighbors(space, "w0", 10).size());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(words));
}
BENCHMARK(BM_NearestNeighbors)->Arg(10000)->Arg(100000);

// One synthetic store shared by the read benchmarks.
struct StoreFixture {
    std::filesystem::path dir;
    scprobe::SyntheticCorpus corpus;

    StoreFixture() {
        dir = std::filesystem::temp_directory_path() / "scprobe_bench_store";
        std::filesystem::remove_all(dir);
        scprobe::SyntheticCorpusConfig config;
        config.n_classes = 34;
        config.n_words = 2000;
        config.dim = 64;
        config.seed = 1;
        corpus = scprobe::make_synthetic_corpus(config);
        scprobe::ClusterEncoder enc;
        enc.dim = 768;
        enc.n_classes = config.n_classes;
        enc.layer_tags = {"L0", "L1"};
        enc.layer_sigma = {1.0, 0.5};
        enc.latent_class = corpus.latent_class;
        enc.write_store(dir, "bench", "bench", corpus.occurrences);
    }
    ~StoreFixture() { std::filesystem::remove_all(dir); }
};

StoreFixture& store_fixture() {
    static StoreFixture f;
    return f;
}

void BM_StoreLoadLayer(benchmark::State& state) {
    const auto store = scprobe::EmbeddingStore::open(store_fixture().dir);
    for (auto _ : state) {
        auto layer = store.load_layer("L1");
        benchmark::DoNotOptimize(&layer);
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(store.rows() * store.dim() * 4));
}
BENCHMARK(BM_StoreLoadLayer)->Unit(benchmark::kMillisecond);

void BM_StoreReadRow(benchmark::State& state) {
    const auto store = scprobe::EmbeddingStore::open(store_fixture().dir);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(store.read_row("L1", i).data());
        i = (i + 7919) % store.rows();
    }
}
BENCHMARK(BM_StoreReadRow);

}  // namespace
BENCHMARK_MAIN();
