#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scprobe/corpus.hpp"
#include "scprobe/embedstore.hpp"
#include "scprobe/space.hpp"
#include "scprobe/wordpiece.hpp"

namespace scprobe {

inline constexpr std::size_t default_random_dim = 300;

// i.i.d. N(0, 1) vector for a word. The generator is seeded from (seed, word)
// so a word's vector does not depend on vocabulary order.
std::vector<float> random_vector(std::string_view word, std::size_t dim, std::uint64_t seed);

TypeLevelSpace random_space(std::span<const std::string> vocab, std::size_t dim = default_random_dim,
                            std::uint64_t seed = 0, std::string name = "Rand");

// Adds random_vector rows for words missing from the space; returns how many were added.
std::size_t fill_oov(TypeLevelSpace& space, std::span<const std::string> words, std::uint64_t seed);

struct VectorFileStats {
    std::size_t lines = 0;
    std::size_t duplicates = 0;
    bool had_header = false;
};

// Text vector format: `word v1 ... vd` per line; an optional fastText-style
// `count dim` first line is skipped. Duplicate words: last occurrence wins.
// Throws parse_error naming the line for malformed numbers, and
// dimension_mismatch naming the line for inconsistent widths.
TypeLevelSpace load_vectors(std::istream& in, std::string name = "vectors", VectorFileStats* stats = nullptr);
TypeLevelSpace load_vectors(const std::filesystem::path& path, VectorFileStats* stats = nullptr);
void write_vectors(std::ostream& out, const TypeLevelSpace& space);

// Coordinate-wise arithmetic mean (accumulated in double). Throws on empty
// input and dimension_mismatch on ragged input.
std::vector<float> mean_pool(std::span<const std::span<const float>> vectors);
std::vector<float> mean_pool(const std::vector<std::vector<float>>& vectors);

/// Resolves words against a type-level space. Multiword phrases ("new york")
/// are looked up whole first, then as the mean of their members; anything
/// still missing gets random_vector(word, dim, oov_seed).
struct WordResolver {
    const TypeLevelSpace* space = nullptr;
    std::uint64_t oov_seed = 0;

    std::vector<float> token(std::string_view token) const;
    std::vector<float> word(std::string_view word) const;
};

/// Same contract over a wordpiece embedding table: a word is the mean of its
/// wordpiece rows (unknown pieces fall back to random_vector of the piece).
struct WordpieceResolver {
    const TypeLevelSpace* table = nullptr;
    const WordpieceTokenizer* tokenizer = nullptr;
    std::uint64_t oov_seed = 0;

    std::vector<std::string> pieces(std::span<const std::string> words) const;
    std::vector<float> piece(std::string_view piece) const;
    std::vector<float> word(std::string_view word) const;
};

// Type-level space of word vectors for `words`, e.g. BERTw from a wordpiece table.
TypeLevelSpace compose_space(std::span<const std::string> words, const WordResolver& resolver, std::string name);
TypeLevelSpace compose_space(std::span<const std::string> words, const WordpieceResolver& resolver, std::string name);

// Anchor space: each word's vector is the mean of its layer vectors over all
// store rows of that word (classes pooled). With a dataset, only rows of the
// dataset's occurrences are used and missing rows throw missing_row.
// Rows are accumulated in row order.
TypeLevelSpace build_anchor_space(const EmbeddingStore& store, const std::string& layer_tag);
TypeLevelSpace build_anchor_space(const EmbeddingStore& store, const std::string& layer_tag,
                                  const ProbingDataset& dataset);

// Bag-of-words "contextualizer": mean of all token vectors of the (already
// windowed) sentence, target included.
std::vector<float> pooled_contextualizer(const WordResolver& resolver, const ContextOccurrence& occurrence);
// Wordpiece variant: mean over every wordpiece of the sentence.
std::vector<float> pooled_contextualizer(const WordpieceResolver& resolver, const ContextOccurrence& occurrence);

}  // namespace scprobe
