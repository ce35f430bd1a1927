#include <algorithm>

#include "scprobe/error.hpp"
#include "scprobe/eval.hpp"

namespace scprobe {

namespace {

// Requested tags in the store's own layer order; unknown tags are an error.
std::vector<std::string> ordered_layers(const EmbeddingManifest& manifest, std::span<const std::string> requested) {
    for (const auto& tag : requested) {
        if (!manifest.has_layer(tag)) {
            fail(ErrorCode::missing_layer_file, "store '" + manifest.encoder_id + "' has no layer '" + tag + "'");
        }
    }
    if (requested.empty()) {
        return manifest.layer_tags;
    }
    std::vector<std::string> out;
    for (const auto& tag : manifest.layer_tags) {
        if (std::find(requested.begin(), requested.end(), tag) != requested.end()) {
            out.push_back(tag);
        }
    }
    return out;
}

}  // namespace

std::vector<ProbeModel> train_token_probes(const ProbingDataset& dataset, const OccurrenceFeatures& train_features,
                                           const ExperimentOptions& options) {
    if (train_features.size() == 0) {
        fail(ErrorCode::invalid_argument, "no training occurrences in split '" +
                                              std::string(split_name(options.train_split)) + "'");
    }
    return train_probe_suite(
        dataset.inventory().size(), [&](int c) { return label_for_class(train_features, c); }, options.train,
        options.jobs);
}

std::vector<EvalReport> sweep_layers(const ProbingDataset& dataset, const EmbeddingStore& store,
                                     std::span<const std::string> layer_tags,
                                     const std::map<std::string, std::vector<ProbeModel>>& probes,
                                     const ExperimentOptions& options) {
    std::vector<EvalReport> reports;
    for (const auto& tag : ordered_layers(store.manifest(), layer_tags)) {
        auto it = probes.find(tag);
        if (it == probes.end()) {
            fail(ErrorCode::missing_probe, "no probe suite for layer '" + tag + "'");
        }
        reports.push_back(eval_token_level(dataset, options.eval_split, store, tag, it->second, options.mode));
    }
    return reports;
}

std::vector<EvalReport> train_and_sweep_layers(const ProbingDataset& dataset, const EmbeddingStore& store,
                                               std::span<const std::string> layer_tags,
                                               const ExperimentOptions& options,
                                               std::map<std::string, std::vector<ProbeModel>>* trained) {
    std::vector<EvalReport> reports;
    for (const auto& tag : ordered_layers(store.manifest(), layer_tags)) {
        const auto layer = store.load_layer(tag);
        const auto train = token_level_features(dataset, store, layer, options.train_split);
        auto probes = train_token_probes(dataset, train, options);
        const auto eval = token_level_features(dataset, store, layer, options.eval_split);
        ReportContext context{store.manifest().encoder_id, tag, store.manifest().context_size_label(),
                              Setup::pretrained};
        reports.push_back(eval_token_level(dataset, options.eval_split, eval, probes, std::move(context), options.mode));
        if (trained) {
            (*trained)[tag] = std::move(probes);
        }
    }
    return reports;
}

std::size_t PooledBaseline::dim() const {
    return std::visit(
        [](const auto& r) -> std::size_t {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, WordResolver>) {
                return r.space->dim();
            } else {
                return r.table->dim();
            }
        },
        resolver);
}

std::vector<float> PooledBaseline::embed(const ContextOccurrence& occurrence) const {
    return std::visit([&](const auto& r) { return pooled_contextualizer(r, occurrence); }, resolver);
}

std::vector<EvalReport> sweep_context_sizes(const ProbingDataset& dataset, const ContextSweepInput& input,
                                            const ExperimentOptions& options) {
    const auto& sizes = input.context_sizes.empty() ? default_context_sizes : input.context_sizes;

    std::vector<std::string> gaps;
    for (auto k : sizes) {
        auto it = input.stores.find(k);
        for (const auto& tag : input.layer_tags) {
            if (it == input.stores.end() || it->second == nullptr || !it->second->manifest().has_layer(tag)) {
                gaps.push_back("(" + tag + ", k=" + std::to_string(k) + ")");
            }
        }
    }
    if (!gaps.empty()) {
        std::string list;
        for (const auto& g : gaps) {
            list += (list.empty() ? "" : " ") + g;
        }
        fail(ErrorCode::missing_input, "context sweep is missing stores for " + list);
    }

    std::vector<EvalReport> reports;
    for (auto k : sizes) {
        if (input.layer_tags.empty()) {
            break;
        }
        const auto& store = *input.stores.at(k);
        for (const auto& tag : ordered_layers(store.manifest(), input.layer_tags)) {
            const auto layer = store.load_layer(tag);
            const auto train = token_level_features(dataset, store, layer, options.train_split);
            const auto probes = train_token_probes(dataset, train, options);
            const auto eval = token_level_features(dataset, store, layer, options.eval_split);
            ReportContext context{store.manifest().encoder_id, tag, std::to_string(k), Setup::pretrained};
            reports.push_back(
                eval_token_level(dataset, options.eval_split, eval, probes, std::move(context), options.mode));
        }
    }
    for (const auto& baseline : input.pooled) {
        for (auto k : sizes) {
            const auto embed = [&](const ContextOccurrence& occ) { return baseline.embed(window_context(occ, k)); };
            const auto train = features_from(dataset, options.train_split, baseline.dim(), embed);
            const auto probes = train_token_probes(dataset, train, options);
            const auto eval = features_from(dataset, options.eval_split, baseline.dim(), embed);
            ReportContext context{baseline.name, baseline.name, std::to_string(k), Setup::pretrained};
            reports.push_back(
                eval_token_level(dataset, options.eval_split, eval, probes, std::move(context), options.mode));
        }
    }
    return reports;
}

std::vector<FinetuneComparison> compare_finetuned(const ProbingDataset& dataset, const EmbeddingStore& pretrained,
                                                  const EmbeddingStore& finetuned,
                                                  std::span<const std::string> layer_tags,
                                                  const std::map<std::string, std::vector<ProbeModel>>& probes,
                                                  const ExperimentOptions& options) {
    require_same_records(pretrained.manifest(), finetuned.manifest());
    std::vector<FinetuneComparison> out;
    for (const auto& tag : ordered_layers(pretrained.manifest(), layer_tags)) {
        auto it = probes.find(tag);
        if (it == probes.end()) {
            fail(ErrorCode::missing_probe, "no pretrained probe suite for layer '" + tag + "'");
        }
        FinetuneComparison cmp;
        cmp.layer_tag = tag;
        cmp.pretrained =
            eval_token_level(dataset, options.eval_split, pretrained, tag, it->second, options.mode, Setup::pretrained);

        const auto ft_layer = finetuned.load_layer(tag);
        const auto ft_eval = token_level_features(dataset, finetuned, ft_layer, options.eval_split);
        const auto& ft_manifest = finetuned.manifest();
        cmp.setup_a = eval_token_level(dataset, options.eval_split, ft_eval, it->second,
                                       {ft_manifest.encoder_id, tag, ft_manifest.context_size_label(),
                                        Setup::finetuned_a},
                                       options.mode);

        const auto ft_train = token_level_features(dataset, finetuned, ft_layer, options.train_split);
        const auto fresh = train_token_probes(dataset, ft_train, options);
        cmp.setup_b = eval_token_level(dataset, options.eval_split, ft_eval, fresh,
                                       {ft_manifest.encoder_id, tag, ft_manifest.context_size_label(),
                                        Setup::finetuned_b},
                                       options.mode);
        cmp.delta_a = cmp.setup_a.f1() - cmp.pretrained.f1();
        cmp.delta_b = cmp.setup_b.f1() - cmp.pretrained.f1();
        out.push_back(std::move(cmp));
    }
    return out;
}

}  // namespace scprobe
