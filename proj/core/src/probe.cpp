#include "scprobe/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "scprobe/baselines.hpp"
#include "scprobe/error.hpp"
#include "scprobe/random.hpp"

namespace scprobe {

template <typename Scalar>
MlpParameters<Scalar> MlpParameters<Scalar>::zeros(std::size_t dim_in, std::size_t hidden) {
    MlpParameters p;
    const auto d = static_cast<Eigen::Index>(dim_in);
    const auto h = static_cast<Eigen::Index>(hidden);
    p.w1 = RowMatrix<Scalar>::Zero(d, h);
    p.b1 = ColVector<Scalar>::Zero(h);
    p.w2 = RowMatrix<Scalar>::Zero(h, 2);
    p.b2 = ColVector<Scalar>::Zero(2);
    return p;
}

template <typename Scalar>
bool MlpParameters<Scalar>::all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

template <typename Scalar>
BasicProbe<Scalar> init_probe(int class_index, std::size_t dim_in, std::size_t hidden, std::uint64_t seed) {
    if (dim_in == 0 || hidden == 0) {
        fail(ErrorCode::invalid_argument, "probe dimensions must be positive");
    }
    BasicProbe<Scalar> model;
    model.class_index = class_index;
    model.init_seed = seed;
    model.params = MlpParameters<Scalar>::zeros(dim_in, hidden);
    Rng rng(derive_seed(seed, "init"));
    const auto fill = [&rng](auto& matrix, double fan_in, double fan_out) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (Eigen::Index i = 0; i < matrix.size(); ++i) {
            matrix.data()[i] = static_cast<Scalar>((2.0 * uniform_unit(rng) - 1.0) * bound);
        }
    };
    fill(model.params.w1, static_cast<double>(dim_in), static_cast<double>(hidden));
    fill(model.params.w2, static_cast<double>(hidden), 2.0);
    return model;
}

namespace {

// Reusable buffers for one forward/backward pass.
template <typename Scalar>
struct Workspace {
    RowMatrix<Scalar> pre;     // N x hidden, pre-activation
    RowMatrix<Scalar> hidden;  // N x hidden, after ReLU
    RowMatrix<Scalar> logits;  // N x 2
    RowMatrix<Scalar> dlogits;
    RowMatrix<Scalar> dhidden;
};

template <typename Scalar>
void forward_pass(const MlpParameters<Scalar>& p, const Eigen::Ref<const RowMatrix<Scalar>>& x, Workspace<Scalar>& ws) {
    ws.pre.noalias() = x * p.w1;
    ws.pre.rowwise() += p.b1.transpose();
    ws.hidden = ws.pre.cwiseMax(Scalar(0));
    ws.logits.noalias() = ws.hidden * p.w2;
    ws.logits.rowwise() += p.b2.transpose();
}

// Numerically stable log-softmax of a pair.
inline std::array<double, 2> log_softmax(double a, double b) {
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    return {a - lse, b - lse};
}

template <typename Scalar>
void check_batch(const MlpParameters<Scalar>& p, Eigen::Index rows, Eigen::Index cols, std::size_t labels) {
    if (static_cast<std::size_t>(cols) != p.dim_in()) {
        fail(ErrorCode::dimension_mismatch, "input width " + std::to_string(cols) + " != probe dim_in " +
                                                std::to_string(p.dim_in()));
    }
    if (static_cast<std::size_t>(rows) != labels) {
        fail(ErrorCode::dimension_mismatch, "batch has " + std::to_string(rows) + " rows but " +
                                                std::to_string(labels) + " labels");
    }
    if (rows == 0) {
        fail(ErrorCode::invalid_argument, "empty batch");
    }
}

template <typename Scalar>
double backward_pass(const MlpParameters<Scalar>& p, const Eigen::Ref<const RowMatrix<Scalar>>& x,
                     std::span<const std::uint8_t> labels, Workspace<Scalar>& ws, MlpParameters<Scalar>& g) {
    forward_pass<Scalar>(p, x, ws);
    const Eigen::Index n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    ws.dlogits.resize(n, 2);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto lp = log_softmax(static_cast<double>(ws.logits(i, 0)), static_cast<double>(ws.logits(i, 1)));
        const int label = labels[static_cast<std::size_t>(i)] ? positive_output : negative_output;
        loss -= lp[static_cast<std::size_t>(label)];
        for (int c = 0; c < 2; ++c) {
            const double prob = std::exp(lp[static_cast<std::size_t>(c)]);
            ws.dlogits(i, c) = static_cast<Scalar>((prob - (c == label ? 1.0 : 0.0)) * inv_n);
        }
    }
    g.w2.noalias() = ws.hidden.transpose() * ws.dlogits;
    g.b2 = ws.dlogits.colwise().sum().transpose();
    ws.dhidden.noalias() = ws.dlogits * p.w2.transpose();
    ws.dhidden = (ws.pre.array() > Scalar(0)).select(ws.dhidden, Scalar(0));
    g.w1.noalias() = x.transpose() * ws.dhidden;
    g.b1 = ws.dhidden.colwise().sum().transpose();
    return loss * inv_n;
}

}  // namespace

template <typename Scalar>
ForwardResult forward(const BasicProbe<Scalar>& model, std::span<const Scalar> x) {
    if (x.size() != model.dim_in()) {
        fail(ErrorCode::dimension_mismatch, "input width " + std::to_string(x.size()) + " != probe dim_in " +
                                                std::to_string(model.dim_in()));
    }
    const Eigen::Map<const RowMatrix<Scalar>> row(x.data(), 1, static_cast<Eigen::Index>(x.size()));
    Workspace<Scalar> ws;
    forward_pass<Scalar>(model.params, row, ws);
    ForwardResult out;
    out.logits = {static_cast<double>(ws.logits(0, 0)), static_cast<double>(ws.logits(0, 1))};
    const auto lp = log_softmax(out.logits[0], out.logits[1]);
    out.probabilities = {std::exp(lp[0]), std::exp(lp[1])};
    return out;
}

template <typename Scalar>
RowMatrix<Scalar> batch_logits(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != model.dim_in()) {
        fail(ErrorCode::dimension_mismatch, "input width does not match probe dim_in");
    }
    Workspace<Scalar> ws;
    forward_pass<Scalar>(model.params, inputs, ws);
    return ws.logits;
}

template <typename Scalar>
double batch_loss(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                  std::span<const std::uint8_t> labels) {
    check_batch(model.params, inputs.rows(), inputs.cols(), labels.size());
    const auto logits = batch_logits(model, inputs);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const auto lp = log_softmax(static_cast<double>(logits(i, 0)), static_cast<double>(logits(i, 1)));
        loss -= lp[labels[static_cast<std::size_t>(i)] ? 1 : 0];
    }
    return loss / static_cast<double>(logits.rows());
}

template <typename Scalar>
double loss_and_gradients(const BasicProbe<Scalar>& model, const Eigen::Ref<const RowMatrix<Scalar>>& inputs,
                          std::span<const std::uint8_t> labels, MlpParameters<Scalar>& gradients) {
    check_batch(model.params, inputs.rows(), inputs.cols(), labels.size());
    Workspace<Scalar> ws;
    return backward_pass<Scalar>(model.params, inputs, labels, ws, gradients);
}

template <typename Scalar>
void adam_update(std::span<Scalar> theta, std::span<Scalar> m, std::span<Scalar> v, std::span<const Scalar> grad,
                 const AdamConfig& config, std::uint64_t step) {
    if (theta.size() != m.size() || theta.size() != v.size() || theta.size() != grad.size()) {
        fail(ErrorCode::dimension_mismatch, "adam_update: shape mismatch");
    }
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    const auto n = static_cast<Eigen::Index>(theta.size());
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> t(theta.data(), n);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> mm(m.data(), n);
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> vv(v.data(), n);
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> g(grad.data(), n);
    const auto b1 = static_cast<Scalar>(config.beta1);
    const auto b2 = static_cast<Scalar>(config.beta2);
    mm = b1 * mm + (Scalar(1) - b1) * g;
    vv = b2 * vv + (Scalar(1) - b2) * g.square();
    const auto lr = static_cast<Scalar>(config.learning_rate);
    const auto inv_bc1 = static_cast<Scalar>(1.0 / bc1);
    const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const auto eps = static_cast<Scalar>(config.epsilon);
    t -= lr * (mm * inv_bc1) / ((vv * inv_bc2).sqrt() + eps);
}

template <typename Scalar>
void adam_step(MlpParameters<Scalar>& params, AdamState<Scalar>& state, const MlpParameters<Scalar>& gradients,
               const AdamConfig& config) {
    ++state.t;
    const auto upd = [&](auto& theta, auto& m, auto& v, const auto& g) {
        const auto n = static_cast<std::size_t>(theta.size());
        adam_update<Scalar>(std::span<Scalar>(theta.data(), n), std::span<Scalar>(m.data(), n),
                            std::span<Scalar>(v.data(), n), std::span<const Scalar>(g.data(), n), config, state.t);
    };
    upd(params.w1, state.m.w1, state.v.w1, gradients.w1);
    upd(params.b1, state.m.b1, state.v.b1, gradients.b1);
    upd(params.w2, state.m.w2, state.v.w2, gradients.w2);
    upd(params.b2, state.m.b2, state.v.b2, gradients.b2);
}

void TrainConfig::check() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorCode::invalid_argument, "learning_rate must be > 0");
    }
    if (epochs == 0) {
        fail(ErrorCode::invalid_argument, "epochs must be >= 1");
    }
    if (batch_size == 0) {
        fail(ErrorCode::invalid_argument, "batch_size must be >= 1");
    }
    if (hidden == 0) {
        fail(ErrorCode::invalid_argument, "hidden must be >= 1");
    }
}

std::size_t LabeledSet::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

ProbeModel train_probe(const LabeledSet& set, const TrainConfig& config, int class_index, std::vector<EpochLog>* log) {
    config.check();
    if (set.size() == 0) {
        fail(ErrorCode::invalid_argument, "cannot train a probe on an empty set");
    }
    if (static_cast<std::size_t>(set.vectors.rows()) != set.size()) {
        fail(ErrorCode::dimension_mismatch, "labeled set has mismatched vectors and labels");
    }
    const std::size_t n = set.size();
    const std::size_t dim = set.dim();
    const auto class_seed = static_cast<std::uint64_t>(class_index);
    ProbeModel model = init_probe<float>(class_index, dim, config.hidden, derive_seed(config.init_seed, class_seed));
    auto state = AdamState<float>::for_shape(dim, config.hidden);
    auto grads = MlpParameters<float>::zeros(dim, config.hidden);
    const AdamConfig adam = config.adam();

    Rng rng(derive_seed(config.shuffle_seed, class_seed ^ 0x5bd1e995ULL));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Workspace<float> ws;
    RowMatrix<float> batch;
    std::vector<std::uint8_t> batch_labels;

    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(std::span(order), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, n - start);
            batch.resize(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(dim));
            batch_labels.resize(b);
            for (std::size_t i = 0; i < b; ++i) {
                const auto src = static_cast<Eigen::Index>(order[start + i]);
                batch.row(static_cast<Eigen::Index>(i)) = set.vectors.row(src);
                batch_labels[i] = set.labels[order[start + i]];
            }
            ++step;
            const double loss = backward_pass<float>(model.params, batch, batch_labels, ws, grads);
            if (!std::isfinite(loss)) {
                fail(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                                std::to_string(step));
            }
            epoch_loss += loss * static_cast<double>(b);
            adam_step(model.params, state, grads, adam);
            if (!model.params.all_finite()) {
                fail(ErrorCode::divergence, "non-finite weights at epoch " + std::to_string(epoch) + " step " +
                                                std::to_string(step));
            }
        }
        if (log) {
            log->push_back({epoch, epoch_loss / static_cast<double>(n)});
        }
    }
    return model;
}

bool predict(const ProbeModel& model, std::span<const float> x) {
    const auto out = forward(model, x);
    return out.logits[positive_output] > out.logits[negative_output];
}

std::vector<std::uint8_t> predict_batch(const ProbeModel& model, const Eigen::Ref<const RowMatrix<float>>& inputs) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(inputs.rows()));
    constexpr Eigen::Index chunk = 4096;
    for (Eigen::Index start = 0; start < inputs.rows(); start += chunk) {
        const Eigen::Index rows = std::min(chunk, inputs.rows() - start);
        const auto logits = batch_logits<float>(model, inputs.middleRows(start, rows));
        for (Eigen::Index i = 0; i < rows; ++i) {
            out[static_cast<std::size_t>(start + i)] = logits(i, positive_output) > logits(i, negative_output) ? 1 : 0;
        }
    }
    return out;
}

// ------------------------------------------------------------ training sets

LabeledSet build_type_level_set(const TypeLevelSpace& space, const SClassInventory& inventory, int class_index,
                                std::span<const std::string> words, std::uint64_t oov_seed) {
    if (words.empty()) {
        fail(ErrorCode::invalid_argument, "type-level training set needs at least one word");
    }
    inventory.name(class_index);
    const WordResolver resolver{&space, oov_seed};
    LabeledSet set;
    set.vectors.resize(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto v = resolver.word(words[i]);
        set.vectors.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(v.size()));
        set.labels.push_back(inventory.has_class(words[i], class_index) ? 1 : 0);
        set.provenance.push_back(static_cast<std::int64_t>(i));
        set.words.push_back(words[i]);
    }
    return set;
}

OccurrenceFeatures token_level_features(const ProbingDataset& dataset, const EmbeddingStore& store,
                                        const LayerMatrix& layer, Split split) {
    const auto occurrences = dataset.occurrences(split);
    OccurrenceFeatures f;
    f.vectors.resize(static_cast<Eigen::Index>(occurrences.size()), static_cast<Eigen::Index>(layer.cols));
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        const auto& occ = occurrences[i];
        const auto row = store.row_of(occ.occurrence_id);
        if (!row) {
            fail(ErrorCode::missing_row, "store '" + store.manifest().encoder_id + "' has no row for occurrence_id " +
                                             std::to_string(occ.occurrence_id));
        }
        const auto src = layer.row(*row);
        f.vectors.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXf>(src.data(), static_cast<Eigen::Index>(src.size()));
        f.occurrence_ids.push_back(occ.occurrence_id);
        f.sclass.push_back(occ.sclass);
    }
    return f;
}

OccurrenceFeatures token_level_features(const ProbingDataset& dataset, const EmbeddingStore& store,
                                        const std::string& layer_tag, Split split) {
    return token_level_features(dataset, store, store.load_layer(layer_tag), split);
}

OccurrenceFeatures features_from(const ProbingDataset& dataset, Split split, std::size_t dim,
                                 const std::function<std::vector<float>(const ContextOccurrence&)>& embed) {
    const auto occurrences = dataset.occurrences(split);
    OccurrenceFeatures f;
    f.vectors.resize(static_cast<Eigen::Index>(occurrences.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        const auto v = embed(occurrences[i]);
        if (v.size() != dim) {
            fail(ErrorCode::dimension_mismatch, "embedding for occurrence " +
                                                    std::to_string(occurrences[i].occurrence_id) + " has wrong width");
        }
        f.vectors.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(dim));
        f.occurrence_ids.push_back(occurrences[i].occurrence_id);
        f.sclass.push_back(occurrences[i].sclass);
    }
    return f;
}

LabeledSet label_for_class(const OccurrenceFeatures& features, int class_index) {
    LabeledSet set;
    set.vectors = features.vectors;
    set.provenance = features.occurrence_ids;
    set.labels.reserve(features.size());
    for (int c : features.sclass) {
        set.labels.push_back(c == class_index ? 1 : 0);
    }
    return set;
}

LabeledSet build_token_level_set(const ProbingDataset& dataset, const EmbeddingStore& store,
                                 const std::string& layer_tag, int class_index, Split split) {
    dataset.inventory().name(class_index);
    return label_for_class(token_level_features(dataset, store, layer_tag, split), class_index);
}

std::vector<ProbeModel> train_probe_suite(std::size_t n_classes, const std::function<LabeledSet(int)>& make_set,
                                          const TrainConfig& config, std::size_t jobs,
                                          std::vector<std::vector<EpochLog>>* logs) {
    std::vector<int> all(n_classes);
    std::iota(all.begin(), all.end(), 0);
    return train_probe_suite(std::span<const int>(all), make_set, config, jobs, logs);
}

std::vector<ProbeModel> train_probe_suite(std::span<const int> classes, const std::function<LabeledSet(int)>& make_set,
                                          const TrainConfig& config, std::size_t jobs,
                                          std::vector<std::vector<EpochLog>>* logs) {
    config.check();
    const std::size_t n_classes = classes.size();
    std::vector<ProbeModel> probes(n_classes);
    std::vector<std::vector<EpochLog>> local_logs(n_classes);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto worker = [&] {
        while (true) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_classes) {
                return;
            }
            try {
                const auto set = make_set(classes[c]);
                probes[c] = train_probe(set, config, classes[c], logs ? &local_logs[c] : nullptr);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = n_classes;
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n_classes));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    if (logs) {
        *logs = std::move(local_logs);
    }
    return probes;
}

template struct MlpParameters<float>;
template struct MlpParameters<double>;
template BasicProbe<float> init_probe<float>(int, std::size_t, std::size_t, std::uint64_t);
template BasicProbe<double> init_probe<double>(int, std::size_t, std::size_t, std::uint64_t);
template ForwardResult forward<float>(const BasicProbe<float>&, std::span<const float>);
template ForwardResult forward<double>(const BasicProbe<double>&, std::span<const double>);
template RowMatrix<float> batch_logits<float>(const BasicProbe<float>&, const Eigen::Ref<const RowMatrix<float>>&);
template RowMatrix<double> batch_logits<double>(const BasicProbe<double>&, const Eigen::Ref<const RowMatrix<double>>&);
template double batch_loss<float>(const BasicProbe<float>&, const Eigen::Ref<const RowMatrix<float>>&,
                                  std::span<const std::uint8_t>);
template double batch_loss<double>(const BasicProbe<double>&, const Eigen::Ref<const RowMatrix<double>>&,
                                   std::span<const std::uint8_t>);
template double loss_and_gradients<float>(const BasicProbe<float>&, const Eigen::Ref<const RowMatrix<float>>&,
                                          std::span<const std::uint8_t>, MlpParameters<float>&);
template double loss_and_gradients<double>(const BasicProbe<double>&, const Eigen::Ref<const RowMatrix<double>>&,
                                           std::span<const std::uint8_t>, MlpParameters<double>&);
template void adam_update<float>(std::span<float>, std::span<float>, std::span<float>, std::span<const float>,
                                 const AdamConfig&, std::uint64_t);
template void adam_update<double>(std::span<double>, std::span<double>, std::span<double>, std::span<const double>,
                                  const AdamConfig&, std::uint64_t);
template void adam_step<float>(MlpParameters<float>&, AdamState<float>&, const MlpParameters<float>&,
                               const AdamConfig&);
template void adam_step<double>(MlpParameters<double>&, AdamState<double>&, const MlpParameters<double>&,
                                const AdamConfig&);

}  // namespace scprobe
