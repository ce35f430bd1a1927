#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scprobe/corpus.hpp"
#include "scprobe/embedstore.hpp"
#include "scprobe/space.hpp"

namespace scprobe {

// Diagnostic probe: input -> Linear(dim_in, hidden) -> ReLU -> Linear(hidden, 2).
// Output index 1 is the positive class everywhere in this library.
inline constexpr std::size_t default_hidden = 1024;
inline constexpr int negative_output = 0;
inline constexpr int positive_output = 1;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ColVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

constexpr std::size_t probe_parameter_count(std::size_t dim_in, std::size_t hidden = default_hidden) noexcept {
    return dim_in * hidden + hidden + hidden * 2 + 2;
}

/// Weights of one probe; also used as the gradient and Adam-moment containers.
template <typename Scalar>
struct MlpParameters {
    RowMatrix<Scalar> w1;  // dim_in x hidden
    ColVector<Scalar> b1;  // hidden
    RowMatrix<Scalar> w2;  // hidden x 2
    ColVector<Scalar> b2;  // 2

    static MlpParameters zeros(std::size_t dim_in, std::size_t hidden);

    std::size_t dim_in() const noexcept { return static_cast<std::size_t>(w1.rows()); }
    std::size_t hidden() const noexcept { return static_cast<std::size_t>(w1.cols()); }
    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
    }
    bool all_finite() const;

    // Visits the four tensors as flat mutable spans, in checkpoint order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(std::span<Scalar>(w1.data(), static_cast<std::size_t>(w1.size())));
        fn(std::span<Scalar>(b1.data(), static_cast<std::size_t>(b1.size())));
        fn(std::span<Scalar>(w2.data(), static_cast<std::size_t>(w2.size())));
        fn(std::span<Scalar>(b2.data(), static_cast<std::size_t>(b2.size())));
    }
};

template <typename Scalar>
struct BasicProbe {
    int class_index = 0;
    std::uint64_t init_seed = 0;
    MlpParameters<Scalar> params;

    std::size_t dim_in() const noexcept { return params.dim_in(); }
    std::size_t hidden() const noexcept { return params.hidden(); }
};

using ProbeModel = BasicProbe<float>;

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, biases zero.
template <typename Scalar>
BasicProbe<Scalar> init_probe(int class_index, std::size_t dim_in, std::size_t hidden, std::uint64_t seed);

struct ForwardResult {
    std::array<double, 2> logits{};
    std::array<double, 2> probabilities{};
};

// Throws dimension_mismatch when |x| != dim_in.
template <typename Scalar>
ForwardResult forward(const BasicProbe<Scalar>& model, std::span<const Scalar> x);

// N x 2 logits for N row-vectors.
template <typename Scalar>
RowMatrix<Scalar> batch_logits(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs);

// Mean softmax cross-entropy of a batch (labels: 1 = positive).
template <typename Scalar>
double batch_loss(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                  std::span<const std::uint8_t> labels);

// Analytic gradient of the mean cross-entropy; returns the loss.
template <typename Scalar>
double loss_and_gradients(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                          std::span<const std::uint8_t> labels, MlpParameters<Scalar>& gradients);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
    MlpParameters<Scalar> m;
    MlpParameters<Scalar> v;
    std::uint64_t t = 0;

    static AdamState for_shape(std::size_t dim_in, std::size_t hidden) {
        return {MlpParameters<Scalar>::zeros(dim_in, hidden), MlpParameters<Scalar>::zeros(dim_in, hidden), 0};
    }
};

// Bias-corrected Adam on flat arrays; `step` is the already-incremented step counter.
template <typename Scalar>
void adam_update(std::span<Scalar> theta, std::span<Scalar> m, std::span<Scalar> v, std::span<const Scalar> grad,
                 const AdamConfig& config, std::uint64_t step);

// Increments state.t, then updates every tensor.
template <typename Scalar>
void adam_step(MlpParameters<Scalar>& params, AdamState<Scalar>& state, const MlpParameters<Scalar>& gradients,
               const AdamConfig& config);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 400;
    std::size_t batch_size = 256;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t hidden = default_hidden;
    std::uint64_t init_seed = 0;
    std::uint64_t shuffle_seed = 0;

    AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
    // Throws invalid_argument on learning_rate <= 0, epochs == 0 or batch_size == 0.
    void check() const;
};

/// Training examples for one class probe.
struct LabeledSet {
    RowMatrix<float> vectors;            // N x dim_in
    std::vector<std::uint8_t> labels;    // 1 = positive
    std::vector<std::int64_t> provenance;  // occurrence ids, or word indices for type-level sets
    std::vector<std::string> words;      // set for type-level sets

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
    std::size_t positives() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
};

// Fixed-length Adam training on shuffled mini-batches; returns the final-epoch
// model. Per-class probe seeds are derived from (seed, class_index).
// Throws divergence naming epoch and step on a non-finite loss.
ProbeModel train_probe(const LabeledSet& set, const TrainConfig& config, int class_index = 0,
                       std::vector<EpochLog>* log = nullptr);

// argmax of the logits; exact ties are negative.
bool predict(const ProbeModel& model, std::span<const float> x);
std::vector<std::uint8_t> predict_batch(const ProbeModel& model, const Eigen::Ref<const RowMatrix<float>>& inputs);

// ---- training-set construction ----

// Type-level: a word is positive iff class_index is among its inventory
// classes. Vectors come from the space, OOV words are filled with
// random_vector(word, dim, oov_seed). Throws invalid_argument on an empty word list.
LabeledSet build_type_level_set(const TypeLevelSpace& space, const SClassInventory& inventory, int class_index,
                                std::span<const std::string> words, std::uint64_t oov_seed = 0);

/// Layer vectors for every occurrence of one split, in dataset order.
struct OccurrenceFeatures {
    RowMatrix<float> vectors;
    std::vector<std::int64_t> occurrence_ids;
    std::vector<int> sclass;

    std::size_t size() const noexcept { return occurrence_ids.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
};

// Throws missing_row naming the occurrence id when the store lacks a row.
OccurrenceFeatures token_level_features(const ProbingDataset& dataset, const EmbeddingStore& store,
                                        const std::string& layer_tag, Split split);
OccurrenceFeatures token_level_features(const ProbingDataset& dataset, const EmbeddingStore& store,
                                        const LayerMatrix& layer, Split split);
// Features from an arbitrary per-occurrence function (e.g. pooled baselines).
OccurrenceFeatures features_from(const ProbingDataset& dataset, Split split, std::size_t dim,
                                 const std::function<std::vector<float>(const ContextOccurrence&)>& embed);

// Token-level: an occurrence is positive iff its class equals class_index.
LabeledSet label_for_class(const OccurrenceFeatures& features, int class_index);
LabeledSet build_token_level_set(const ProbingDataset& dataset, const EmbeddingStore& store,
                                 const std::string& layer_tag, int class_index, Split split);

// ---- probe suites ----

// One probe per class (index = class index). Classes train independently on up
// to `jobs` threads; results do not depend on `jobs`.
std::vector<ProbeModel> train_probe_suite(std::size_t n_classes, const std::function<LabeledSet(int)>& make_set,
                                          const TrainConfig& config, std::size_t jobs = 1,
                                          std::vector<std::vector<EpochLog>>* logs = nullptr);
// Only the listed classes; element i of the result is the probe for classes[i]
// and is identical to the one the full suite would train for that class.
std::vector<ProbeModel> train_probe_suite(std::span<const int> classes, const std::function<LabeledSet(int)>& make_set,
                                          const TrainConfig& config, std::size_t jobs = 1,
                                          std::vector<std::vector<EpochLog>>* logs = nullptr);

// Checkpoint: int32 class_index, uint32 dim_in, uint32 hidden, uint64 seed
// (little-endian), then float32 w1 (row-major dim_in x hidden), b1, w2
// (row-major hidden x 2), b2.
void save_probe(const std::filesystem::path& file, const ProbeModel& model);
ProbeModel load_probe(const std::filesystem::path& file);

std::filesystem::path probe_file_name(int class_index);
void save_probe_suite(const std::filesystem::path& dir, std::span<const ProbeModel> probes);
// Throws missing_probe for any class without a checkpoint.
std::vector<ProbeModel> load_probe_suite(const std::filesystem::path& dir, std::size_t n_classes);

}  // namespace scprobe
