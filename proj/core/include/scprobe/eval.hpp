#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scprobe/baselines.hpp"
#include "scprobe/corpus.hpp"
#include "scprobe/embedstore.hpp"
#include "scprobe/probe.hpp"

namespace scprobe {

/// One binary decision of one class probe on one evaluation unit (a word for
/// type-level probing, a word-s-class combination for token-level probing).
struct Decision {
    std::string unit;
    int class_index = 0;
    bool gold = false;
    bool predicted = false;
};

struct MicroScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t decisions() const noexcept { return tp + fp + fn + tn; }
    double accuracy() const noexcept {
        const auto n = decisions();
        return n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
    }
};

// Smallest count that satisfies the majority rule for n contexts: ceil(n / 2).
constexpr std::size_t majority_threshold(std::size_t n) noexcept { return (n + 1) / 2; }

// True iff at least ceil(n/2) of the n per-context outcomes are true.
// Throws invalid_argument on n == 0.
bool aggregate_combination(std::span<const std::uint8_t> per_context);
bool aggregate_combination(std::size_t true_count, std::size_t n);

// Pooled TP/FP/FN over all decisions. P = 0 when nothing is predicted
// positive, R = 0 when nothing is gold positive, F1 = 0 when P + R = 0.
MicroScores micro_f1(std::span<const Decision> decisions);
MicroScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0);

enum class DecisionMode {
    // every (combination, class) pair is a decision; micro-F1 over all of them
    per_combination_per_class,
    // only the combination's own class; accuracy is the headline number
    own_class_only,
};

std::string_view decision_mode_name(DecisionMode mode) noexcept;
DecisionMode parse_decision_mode(std::string_view name);

enum class Setup { pretrained, finetuned_a, finetuned_b, type_level };

std::string_view setup_name(Setup setup) noexcept;
Setup parse_setup(std::string_view name);

struct ReportContext {
    std::string encoder_id;
    std::string layer_tag;
    std::string context_size = "full";
    Setup setup = Setup::pretrained;
};

struct EvalReport {
    ReportContext context;
    DecisionMode decision_mode = DecisionMode::per_combination_per_class;
    Split split = Split::dev;
    MicroScores micro;
    std::vector<std::string> class_names;
    std::vector<MicroScores> per_class;
    std::size_t units = 0;
    std::vector<Decision> decisions;

    double f1() const noexcept { return micro.f1; }
    std::size_t decision_count() const noexcept { return micro.decisions(); }
};

// Builds a report (micro and per-class scores) from a decision table.
EvalReport make_report(ReportContext context, DecisionMode mode, Split split, const SClassInventory& inventory,
                       std::vector<Decision> decisions, std::size_t units);

// For every word and class: predicted = probe_c(vector(word)), gold = inventory
// membership. OOV words are filled with random vectors, never skipped.
// Throws missing_probe unless probes[c].class_index == c for every class.
EvalReport eval_type_level(const TypeLevelSpace& space, std::span<const ProbeModel> probes,
                           std::span<const std::string> words, const SClassInventory& inventory,
                           ReportContext context, std::uint64_t oov_seed = 0, Split split = Split::test);

// For every combination of the split and every class c: probe_c runs on each of
// the combination's contexts; the aggregated prediction is "at least
// ceil(n/2) contexts predicted positive"; gold is (c == combination class).
EvalReport eval_token_level(const ProbingDataset& dataset, Split split, const OccurrenceFeatures& features,
                            std::span<const ProbeModel> probes, ReportContext context,
                            DecisionMode mode = DecisionMode::per_combination_per_class);
EvalReport eval_token_level(const ProbingDataset& dataset, Split split, const EmbeddingStore& store,
                            const std::string& layer_tag, std::span<const ProbeModel> probes,
                            DecisionMode mode = DecisionMode::per_combination_per_class,
                            Setup setup = Setup::pretrained);

// ---- experiment drivers ----

struct ExperimentOptions {
    TrainConfig train;
    Split train_split = Split::train;
    Split eval_split = Split::dev;
    DecisionMode mode = DecisionMode::per_combination_per_class;
    std::size_t jobs = 1;
};

std::vector<ProbeModel> train_token_probes(const ProbingDataset& dataset, const OccurrenceFeatures& train_features,
                                           const ExperimentOptions& options);

// Evaluates the given per-layer probes; reports follow the store's layer order
// restricted to `layer_tags`.
std::vector<EvalReport> sweep_layers(const ProbingDataset& dataset, const EmbeddingStore& store,
                                     std::span<const std::string> layer_tags,
                                     const std::map<std::string, std::vector<ProbeModel>>& probes,
                                     const ExperimentOptions& options);

// Trains one probe suite per layer on the train split, then evaluates it.
// Trained suites are returned through `trained` when non-null.
std::vector<EvalReport> train_and_sweep_layers(const ProbingDataset& dataset, const EmbeddingStore& store,
                                               std::span<const std::string> layer_tags,
                                               const ExperimentOptions& options,
                                               std::map<std::string, std::vector<ProbeModel>>* trained = nullptr);

/// A bag-of-words baseline evaluated alongside the encoder stores in a
/// context-size sweep (P-BERT over a wordpiece table, P-fastText / P-Rand over
/// word vectors). Windowing is applied before pooling.
struct PooledBaseline {
    std::string name;
    std::variant<WordResolver, WordpieceResolver> resolver;

    std::size_t dim() const;
    std::vector<float> embed(const ContextOccurrence& occurrence) const;
};

struct ContextSweepInput {
    std::map<std::size_t, const EmbeddingStore*> stores;  // keyed by context size k
    std::vector<std::string> layer_tags;
    std::vector<std::size_t> context_sizes;
    std::vector<PooledBaseline> pooled;
};

inline const std::vector<std::size_t> default_context_sizes{0, 2, 4, 8, 16, 32};

// Grid of reports keyed by (layer, k): store rows first (k-major, layer order),
// then pooled baselines. Throws missing_input listing every missing (layer, k).
std::vector<EvalReport> sweep_context_sizes(const ProbingDataset& dataset, const ContextSweepInput& input,
                                            const ExperimentOptions& options);

struct FinetuneComparison {
    std::string layer_tag;
    EvalReport pretrained;
    EvalReport setup_a;  // frozen pretrained probes on finetuned rows
    EvalReport setup_b;  // fresh probes trained on finetuned rows
    double delta_a = 0.0;
    double delta_b = 0.0;
};

// Throws record_mismatch when the stores differ in record order or layers, and
// missing_probe when a layer has no pretrained probe suite.
std::vector<FinetuneComparison> compare_finetuned(const ProbingDataset& dataset, const EmbeddingStore& pretrained,
                                                  const EmbeddingStore& finetuned,
                                                  std::span<const std::string> layer_tags,
                                                  const std::map<std::string, std::vector<ProbeModel>>& probes,
                                                  const ExperimentOptions& options);

// ---- serialization ----
//
// CSV columns: encoder_id,layer,context_size,setup,class,precision,recall,f1,decisions
// One row with class "ALL" (micro scores) followed by one row per class.

inline constexpr const char* report_csv_header = "encoder_id,layer,context_size,setup,class,precision,recall,f1,decisions";

std::string report_to_json(const EvalReport& report, bool include_decisions = false);
EvalReport report_from_json(const std::string& text);
std::string reports_to_json(std::span<const EvalReport> reports);
std::vector<EvalReport> reports_from_json(const std::string& text);
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports, bool header = true);

}  // namespace scprobe
