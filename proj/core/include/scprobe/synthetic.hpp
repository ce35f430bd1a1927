#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scprobe/corpus.hpp"
#include "scprobe/embedstore.hpp"
#include "scprobe/space.hpp"

namespace scprobe {

// The 34 Wiki-PSE semantic classes, ordered by training-set frequency.
const std::vector<std::string>& reference_class_names();

/// Planted-signal corpus generator for desk-scale experiments.
///
/// Every sentence is `fillers cues @target@ cues fillers`. Cue tokens sit
/// within `cue_radius` of the target and are drawn from a per-class cue
/// vocabulary whose embeddings cluster around a class centroid; target and
/// filler embeddings are class-independent Gaussian noise. Class evidence is
/// therefore only available from the neighbourhood of the target.
struct SyntheticCorpusConfig {
    std::size_t n_classes = 8;
    std::size_t n_words = 120;
    std::size_t dim = 32;
    std::size_t min_classes_per_word = 1;
    std::size_t max_classes_per_word = 2;
    std::size_t min_contexts = 5;   // per word-class combination
    std::size_t max_contexts = 40;
    std::size_t oversized_combinations = 0;  // combinations given `oversized_contexts` contexts
    std::size_t oversized_contexts = 150;
    std::size_t cue_radius = 2;
    std::size_t max_fillers_per_side = 4;
    std::size_t min_fillers_per_side = 0;
    std::size_t cues_per_class = 6;
    std::size_t filler_vocab = 300;
    double centroid_scale = 1.0;
    double cue_spread = 0.3;
    double target_scale = 1.0;
    double filler_scale = 1.0;
    double test_word_fraction = 0.5;
    bool shuffle_labels = false;
    std::uint64_t seed = 7;
};

struct SyntheticCorpus {
    SClassInventory inventory;
    std::vector<ContextOccurrence> occurrences;  // ids 0..N-1; splits train/test (word-disjoint)
    std::vector<int> latent_class;               // class that generated each sentence
    TypeLevelSpace token_embeddings;             // every token of the corpus
};

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusConfig& config);

// `split<TAB>tokens` with the target written as @a_b@/class.
std::string to_marker_line(const ContextOccurrence& occurrence, const SClassInventory& inventory,
                           const MarkerConvention& convention = {});

/// Stand-in encoder for tests and demos: layer l of an occurrence is the mean
/// token embedding of its (optionally windowed) sentence plus isotropic noise
/// of standard deviation layer_noise[l], seeded by (seed, occurrence id, l).
struct ToyEncoder {
    const TypeLevelSpace* embeddings = nullptr;
    std::vector<std::string> layer_tags{"L0"};
    std::vector<double> layer_noise{0.0};
    std::uint64_t seed = 0;

    std::vector<float> encode(const ContextOccurrence& occurrence, std::size_t layer) const;

    // Writes a store over `occurrences` (row i = occurrences[i]); with a
    // context size, each sentence is windowed first.
    void write_store(const std::filesystem::path& dir, const std::string& dataset_id, const std::string& encoder_id,
                     std::span<const ContextOccurrence> occurrences,
                     std::optional<std::size_t> context_size = std::nullopt) const;
};

/// Gaussian-cluster encoder: layer l of an occurrence is the centroid of the
/// class that generated it plus N(0, layer_sigma[l]^2 I) noise. The generating
/// class is looked up by occurrence id in `latent_class`, so label shuffling
/// does not move the geometry. Centroids are N(0, centroid_scale^2 I).
struct ClusterEncoder {
    std::size_t dim = 32;
    std::size_t n_classes = 8;
    double centroid_scale = 1.0;
    std::vector<std::string> layer_tags{"L0"};
    std::vector<double> layer_sigma{0.5};
    std::span<const int> latent_class;
    std::uint64_t seed = 0;

    std::vector<float> centroid(int class_index) const;
    std::vector<float> encode(const ContextOccurrence& occurrence, std::size_t layer) const;
    void write_store(const std::filesystem::path& dir, const std::string& dataset_id, const std::string& encoder_id,
                     std::span<const ContextOccurrence> occurrences) const;
};

}  // namespace scprobe
