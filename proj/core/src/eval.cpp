#include "scprobe/eval.hpp"

#include <algorithm>
#include <unordered_map>

#include "scprobe/error.hpp"

namespace scprobe {

bool aggregate_combination(std::size_t true_count, std::size_t n) {
    if (n == 0) {
        fail(ErrorCode::invalid_argument, "cannot aggregate a combination with no contexts");
    }
    if (true_count > n) {
        fail(ErrorCode::invalid_argument, "more correct contexts than contexts");
    }
    return true_count >= majority_threshold(n);
}

bool aggregate_combination(std::span<const std::uint8_t> per_context) {
    const auto hits = static_cast<std::size_t>(std::count_if(per_context.begin(), per_context.end(),
                                                             [](std::uint8_t b) { return b != 0; }));
    return aggregate_combination(hits, per_context.size());
}

MicroScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    MicroScores s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.tn = tn;
    s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

MicroScores micro_f1(std::span<const Decision> decisions) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    for (const auto& d : decisions) {
        if (d.predicted) {
            (d.gold ? tp : fp) += 1;
        } else {
            (d.gold ? fn : tn) += 1;
        }
    }
    return scores_from_counts(tp, fp, fn, tn);
}

std::string_view decision_mode_name(DecisionMode mode) noexcept {
    switch (mode) {
        case DecisionMode::per_combination_per_class: return "per-combination-per-class";
        case DecisionMode::own_class_only: return "own-class-only";
    }
    return "per-combination-per-class";
}

DecisionMode parse_decision_mode(std::string_view name) {
    for (auto m : {DecisionMode::per_combination_per_class, DecisionMode::own_class_only}) {
        if (decision_mode_name(m) == name) {
            return m;
        }
    }
    fail(ErrorCode::invalid_argument, "unknown decision mode '" + std::string(name) + "'");
}

std::string_view setup_name(Setup setup) noexcept {
    switch (setup) {
        case Setup::pretrained: return "pretrained";
        case Setup::finetuned_a: return "finetuned-a";
        case Setup::finetuned_b: return "finetuned-b";
        case Setup::type_level: return "type-level";
    }
    return "pretrained";
}

Setup parse_setup(std::string_view name) {
    for (auto s : {Setup::pretrained, Setup::finetuned_a, Setup::finetuned_b, Setup::type_level}) {
        if (setup_name(s) == name) {
            return s;
        }
    }
    fail(ErrorCode::invalid_argument, "unknown setup '" + std::string(name) + "'");
}

EvalReport make_report(ReportContext context, DecisionMode mode, Split split, const SClassInventory& inventory,
                       std::vector<Decision> decisions, std::size_t units) {
    EvalReport report;
    report.context = std::move(context);
    report.decision_mode = mode;
    report.split = split;
    report.units = units;
    report.class_names = inventory.classes();
    report.micro = micro_f1(decisions);
    std::vector<std::array<std::size_t, 4>> counts(inventory.size(), {0, 0, 0, 0});
    for (const auto& d : decisions) {
        auto& c = counts.at(static_cast<std::size_t>(d.class_index));
        c[d.predicted ? (d.gold ? 0 : 1) : (d.gold ? 2 : 3)] += 1;
    }
    for (const auto& c : counts) {
        report.per_class.push_back(scores_from_counts(c[0], c[1], c[2], c[3]));
    }
    report.decisions = std::move(decisions);
    return report;
}

namespace {

void check_probes(std::span<const ProbeModel> probes, std::size_t n_classes, std::size_t dim) {
    if (probes.size() < n_classes) {
        fail(ErrorCode::missing_probe, "expected " + std::to_string(n_classes) + " probes, got " +
                                           std::to_string(probes.size()));
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (probes[c].class_index != static_cast<int>(c)) {
            fail(ErrorCode::missing_probe, "no probe for class " + std::to_string(c));
        }
        if (probes[c].dim_in() != dim) {
            fail(ErrorCode::dimension_mismatch, "probe for class " + std::to_string(c) + " expects dim " +
                                                    std::to_string(probes[c].dim_in()) + ", inputs have " +
                                                    std::to_string(dim));
        }
    }
}

}  // namespace

EvalReport eval_type_level(const TypeLevelSpace& space, std::span<const ProbeModel> probes,
                           std::span<const std::string> words, const SClassInventory& inventory,
                           ReportContext context, std::uint64_t oov_seed, Split split) {
    const std::size_t n_classes = inventory.size();
    check_probes(probes, n_classes, space.dim());
    context.setup = Setup::type_level;
    if (words.empty()) {
        return make_report(std::move(context), DecisionMode::per_combination_per_class, split, inventory, {}, 0);
    }
    const WordResolver resolver{&space, oov_seed};
    RowMatrix<float> vectors(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t i = 0; i < words.size(); ++i) {
        const auto v = resolver.word(words[i]);
        vectors.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    std::vector<Decision> decisions;
    decisions.reserve(words.size() * n_classes);
    std::vector<std::vector<std::uint8_t>> predictions(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        predictions[c] = predict_batch(probes[c], vectors);
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (std::size_t c = 0; c < n_classes; ++c) {
            decisions.push_back({words[i], static_cast<int>(c), inventory.has_class(words[i], static_cast<int>(c)),
                                 predictions[c][i] != 0});
        }
    }
    return make_report(std::move(context), DecisionMode::per_combination_per_class, split, inventory,
                       std::move(decisions), words.size());
}

EvalReport eval_token_level(const ProbingDataset& dataset, Split split, const OccurrenceFeatures& features,
                            std::span<const ProbeModel> probes, ReportContext context, DecisionMode mode) {
    const auto& inventory = dataset.inventory();
    const std::size_t n_classes = inventory.size();
    check_probes(probes, n_classes, features.dim());

    std::unordered_map<std::int64_t, std::size_t> row_of;
    for (std::size_t i = 0; i < features.size(); ++i) {
        row_of.emplace(features.occurrence_ids[i], i);
    }
    const auto combinations = dataset.combinations(split);

    // Only classes that will be scored need probe outputs.
    std::vector<char> needed(n_classes, mode == DecisionMode::per_combination_per_class ? 1 : 0);
    if (mode == DecisionMode::own_class_only) {
        for (const auto& combo : combinations) {
            needed[static_cast<std::size_t>(combo.sclass)] = 1;
        }
    }
    std::vector<std::vector<std::uint8_t>> fired(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (needed[c]) {
            fired[c] = predict_batch(probes[c], features.vectors);
        }
    }

    std::vector<Decision> decisions;
    decisions.reserve(combinations.size() * (mode == DecisionMode::own_class_only ? 1 : n_classes));
    std::vector<std::size_t> rows;
    for (const auto& combo : combinations) {
        rows.clear();
        for (auto id : combo.occurrence_ids) {
            auto it = row_of.find(id);
            if (it == row_of.end()) {
                fail(ErrorCode::missing_row, "no feature row for occurrence_id " + std::to_string(id));
            }
            rows.push_back(it->second);
        }
        const std::string unit = "@" + combo.word + "@-" + inventory.name(combo.sclass);
        const auto decide = [&](std::size_t c) {
            std::size_t positives = 0;
            for (auto r : rows) {
                positives += fired[c][r];
            }
            const bool predicted = aggregate_combination(positives, rows.size());
            decisions.push_back({unit, static_cast<int>(c), static_cast<int>(c) == combo.sclass, predicted});
        };
        if (mode == DecisionMode::own_class_only) {
            decide(static_cast<std::size_t>(combo.sclass));
        } else {
            for (std::size_t c = 0; c < n_classes; ++c) {
                decide(c);
            }
        }
    }
    return make_report(std::move(context), mode, split, inventory, std::move(decisions), combinations.size());
}

EvalReport eval_token_level(const ProbingDataset& dataset, Split split, const EmbeddingStore& store,
                            const std::string& layer_tag, std::span<const ProbeModel> probes, DecisionMode mode,
                            Setup setup) {
    const auto features = token_level_features(dataset, store, layer_tag, split);
    ReportContext context{store.manifest().encoder_id, layer_tag, store.manifest().context_size_label(), setup};
    return eval_token_level(dataset, split, features, probes, std::move(context), mode);
}

}  // namespace scprobe
