#include "scprobe/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "scprobe/baselines.hpp"
#include "scprobe/error.hpp"
#include "scprobe/random.hpp"

namespace scprobe {

const std::vector<std::string>& reference_class_names() {
    static const std::vector<std::string> names{
        "location", "person", "organization", "art", "event", "broadcast-program", "title", "product",
        "living-thing", "people-ethnicity", "language", "broadcast-network", "time", "religion-religion", "award",
        "internet-website", "god", "education-educational-degree", "food", "computer-programming-language",
        "metropolitan-transit-transit-line", "transit", "finance-currency", "disease", "chemistry", "body-part",
        "finance-stock-exchange", "law", "medicine-medical-treatment", "medicine-drug", "broadcast-tv-channel",
        "medicine-symptom", "biology", "visual-art-color"};
    return names;
}

namespace {

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
    return buf;
}

std::vector<float> scaled_normal(Rng& rng, std::size_t dim, double scale) {
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = static_cast<float>(scale * standard_normal(rng));
    }
    return v;
}

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform_below(rng, hi - lo + 1));
}

template <typename Encode>
void write_encoded_store(const std::filesystem::path& dir, const EmbeddingManifest& manifest,
                         std::span<const ContextOccurrence> occurrences, Encode&& encode) {
    std::vector<LayerMatrix> layers;
    for (const auto& tag : manifest.layer_tags) {
        layers.emplace_back(tag, occurrences.size(), manifest.dim);
    }
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto v = encode(occurrences[i], l);
            std::copy(v.begin(), v.end(), layers[l].row(i).begin());
        }
    }
    write_store(dir, manifest, layers);
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusConfig& config) {
    if (config.n_classes == 0 || config.n_words == 0 || config.dim == 0 || config.cues_per_class == 0 ||
        config.filler_vocab == 0) {
        fail(ErrorCode::invalid_argument, "synthetic corpus sizes must be positive");
    }
    if (config.min_classes_per_word == 0 || config.min_classes_per_word > config.max_classes_per_word ||
        config.max_classes_per_word > config.n_classes) {
        fail(ErrorCode::invalid_argument, "invalid classes-per-word range");
    }
    if (config.min_contexts == 0 || config.min_contexts > config.max_contexts) {
        fail(ErrorCode::invalid_argument, "invalid contexts-per-combination range");
    }
    if (config.min_fillers_per_side > config.max_fillers_per_side) {
        fail(ErrorCode::invalid_argument, "invalid filler range");
    }

    Rng rng(derive_seed(config.seed, "synthetic-corpus"));
    std::vector<std::string> class_names;
    const auto& reference = reference_class_names();
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        class_names.push_back(c < reference.size() ? reference[c] : numbered("class", c));
    }

    SyntheticCorpus corpus;
    corpus.token_embeddings = TypeLevelSpace("synthetic-tokens", config.dim);

    // class centroids and cue vocabularies
    std::vector<std::vector<std::string>> cues(config.n_classes);
    for (std::size_t c = 0; c < config.n_classes; ++c) {
        const auto centroid = scaled_normal(rng, config.dim, config.centroid_scale);
        for (std::size_t i = 0; i < config.cues_per_class; ++i) {
            auto v = scaled_normal(rng, config.dim, config.cue_spread);
            for (std::size_t j = 0; j < config.dim; ++j) {
                v[j] += centroid[j];
            }
            cues[c].push_back("cue" + std::to_string(c) + "x" + std::to_string(i));
            corpus.token_embeddings.set(cues[c].back(), v);
        }
    }
    std::vector<std::string> fillers;
    for (std::size_t i = 0; i < config.filler_vocab; ++i) {
        fillers.push_back(numbered("fill", i));
        corpus.token_embeddings.set(fillers.back(), scaled_normal(rng, config.dim, config.filler_scale));
    }

    // words, their classes and their split (word-level, like the source partition)
    struct WordSpec {
        std::string word;
        std::vector<int> classes;
        Split split;
    };
    std::vector<WordSpec> words;
    std::vector<std::size_t> order(config.n_words);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span(order), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(config.test_word_fraction * config.n_words));
    std::vector<Split> split_of(config.n_words, Split::train);
    for (std::size_t i = 0; i < n_test; ++i) {
        split_of[order[i]] = Split::test;
    }
    for (std::size_t w = 0; w < config.n_words; ++w) {
        WordSpec spec{numbered("word", w), {}, split_of[w]};
        corpus.token_embeddings.set(spec.word, scaled_normal(rng, config.dim, config.target_scale));
        std::vector<int> all(config.n_classes);
        std::iota(all.begin(), all.end(), 0);
        shuffle(std::span(all), rng);
        const auto k = draw_between(rng, config.min_classes_per_word, config.max_classes_per_word);
        spec.classes.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(spec.classes.begin(), spec.classes.end());
        words.push_back(std::move(spec));
    }

    // sentences; combinations are emitted word by word with contexts interleaved across classes
    std::size_t oversized_left = config.oversized_combinations;
    std::int64_t next_id = 0;
    for (const auto& spec : words) {
        std::vector<int> schedule;
        for (int c : spec.classes) {
            std::size_t n = draw_between(rng, config.min_contexts, config.max_contexts);
            if (oversized_left > 0) {
                n = config.oversized_contexts;
                --oversized_left;
            }
            schedule.insert(schedule.end(), n, c);
        }
        shuffle(std::span(schedule), rng);
        for (int c : schedule) {
            ContextOccurrence occ;
            occ.occurrence_id = next_id++;
            occ.word = spec.word;
            occ.sclass = c;
            occ.split = spec.split;
            const auto left = draw_between(rng, config.min_fillers_per_side, config.max_fillers_per_side);
            const auto right = draw_between(rng, config.min_fillers_per_side, config.max_fillers_per_side);
            const auto& class_cues = cues[static_cast<std::size_t>(c)];
            for (std::size_t i = 0; i < left; ++i) {
                occ.tokens.push_back(fillers[uniform_below(rng, fillers.size())]);
            }
            for (std::size_t i = 0; i < config.cue_radius; ++i) {
                occ.tokens.push_back(class_cues[uniform_below(rng, class_cues.size())]);
            }
            occ.target_span = {occ.tokens.size(), occ.tokens.size()};
            occ.tokens.push_back(spec.word);
            for (std::size_t i = 0; i < config.cue_radius; ++i) {
                occ.tokens.push_back(class_cues[uniform_below(rng, class_cues.size())]);
            }
            for (std::size_t i = 0; i < right; ++i) {
                occ.tokens.push_back(fillers[uniform_below(rng, fillers.size())]);
            }
            corpus.latent_class.push_back(c);
            corpus.occurrences.push_back(std::move(occ));
        }
    }

    if (config.shuffle_labels) {
        std::vector<int> labels;
        for (const auto& o : corpus.occurrences) {
            labels.push_back(o.sclass);
        }
        shuffle(std::span(labels), rng);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            corpus.occurrences[i].sclass = labels[i];
        }
    }

    corpus.inventory = SClassInventory(class_names);
    for (const auto& o : corpus.occurrences) {
        const int c = o.sclass;
        corpus.inventory.add_word(o.word, std::span(&c, 1));
    }
    return corpus;
}

std::string to_marker_line(const ContextOccurrence& occurrence, const SClassInventory& inventory,
                           const MarkerConvention& convention) {
    std::string line(split_name(occurrence.split));
    line += '\t';
    for (std::size_t i = 0; i < occurrence.tokens.size(); ++i) {
        if (i == occurrence.target_span.first) {
            line += convention.marker;
            for (std::size_t j = occurrence.target_span.first; j <= occurrence.target_span.last; ++j) {
                if (j != occurrence.target_span.first) {
                    line += convention.phrase_joiner;
                }
                line += occurrence.tokens[j];
            }
            line += convention.marker;
            line += convention.label_separator;
            line += inventory.name(occurrence.sclass);
            i = occurrence.target_span.last;
        } else {
            line += occurrence.tokens[i];
        }
        if (i + 1 < occurrence.tokens.size()) {
            line += ' ';
        }
    }
    return line;
}

std::vector<float> ToyEncoder::encode(const ContextOccurrence& occurrence, std::size_t layer) const {
    const WordResolver resolver{embeddings, seed};
    auto v = pooled_contextualizer(resolver, occurrence);
    const double sigma = layer_noise.at(layer);
    if (sigma > 0.0) {
        Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(occurrence.occurrence_id)), layer));
        for (auto& x : v) {
            x += static_cast<float>(sigma * standard_normal(rng));
        }
    }
    return v;
}

void ToyEncoder::write_store(const std::filesystem::path& dir, const std::string& dataset_id,
                             const std::string& encoder_id, std::span<const ContextOccurrence> occurrences,
                             std::optional<std::size_t> context_size) const {
    if (layer_tags.size() != layer_noise.size()) {
        fail(ErrorCode::invalid_argument, "toy encoder needs one noise level per layer tag");
    }
    write_encoded_store(dir, make_manifest(dataset_id, encoder_id, layer_tags, embeddings->dim(), occurrences,
                                           context_size),
                        occurrences, [&](const ContextOccurrence& occ, std::size_t l) {
                            return encode(context_size ? window_context(occ, *context_size) : occ, l);
                        });
}

std::vector<float> ClusterEncoder::centroid(int class_index) const {
    if (class_index < 0 || static_cast<std::size_t>(class_index) >= n_classes) {
        fail(ErrorCode::unknown_class, "cluster encoder has no class " + std::to_string(class_index));
    }
    Rng rng(derive_seed(derive_seed(seed, "centroid"), static_cast<std::uint64_t>(class_index)));
    return scaled_normal(rng, dim, centroid_scale);
}

std::vector<float> ClusterEncoder::encode(const ContextOccurrence& occurrence, std::size_t layer) const {
    const auto id = occurrence.occurrence_id;
    if (id < 0 || static_cast<std::size_t>(id) >= latent_class.size()) {
        fail(ErrorCode::missing_row, "no generating class for occurrence " + std::to_string(id));
    }
    auto v = centroid(latent_class[static_cast<std::size_t>(id)]);
    Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(id)), layer));
    const double sigma = layer_sigma.at(layer);
    for (auto& x : v) {
        x += static_cast<float>(sigma * standard_normal(rng));
    }
    return v;
}

void ClusterEncoder::write_store(const std::filesystem::path& dir, const std::string& dataset_id,
                                 const std::string& encoder_id, std::span<const ContextOccurrence> occurrences) const {
    if (layer_tags.size() != layer_sigma.size()) {
        fail(ErrorCode::invalid_argument, "cluster encoder needs one sigma per layer tag");
    }
    write_encoded_store(dir, make_manifest(dataset_id, encoder_id, layer_tags, dim, occurrences), occurrences,
                        [&](const ContextOccurrence& occ, std::size_t l) { return encode(occ, l); });
}

}  // namespace scprobe
