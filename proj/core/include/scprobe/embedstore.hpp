#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scprobe/corpus.hpp"
#include "scprobe/error.hpp"

namespace scprobe {

// On-disk layout of an embedding store directory:
//
//   manifest.json      dataset/encoder ids, ordered layer tags, dim, context size, records
//   <layer_tag>.f32    rows x dim little-endian float32, row-major, row i = records[i]
//   attention/         optional; one <example_id>.attn file per example
//
// Manifest field names are a stable contract shared with external extractors.

struct ManifestRecord {
    std::size_t row_index = 0;
    std::int64_t occurrence_id = 0;
    std::string word;
    int sclass = 0;
    Split split = Split::train;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct EmbeddingManifest {
    std::string dataset_id;
    std::string encoder_id;
    std::vector<std::string> layer_tags;
    std::size_t dim = 0;
    std::optional<std::size_t> context_size;  // nullopt = full sentence
    std::vector<ManifestRecord> records;

    std::string context_size_label() const;
    bool has_layer(std::string_view tag) const;
};

// Manifest for a set of occurrences in the given order (row i = occurrences[i]).
EmbeddingManifest make_manifest(std::string dataset_id, std::string encoder_id, std::vector<std::string> layer_tags,
                                std::size_t dim, std::span<const ContextOccurrence> occurrences,
                                std::optional<std::size_t> context_size = std::nullopt);

struct LayerMatrix {
    std::string layer_tag;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    LayerMatrix() = default;
    LayerMatrix(std::string tag, std::size_t n_rows, std::size_t n_cols)
        : layer_tag(std::move(tag)), rows(n_rows), cols(n_cols), data(n_rows * n_cols, 0.0f) {}

    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

std::string manifest_to_json(const EmbeddingManifest& manifest);
EmbeddingManifest manifest_from_json(const std::string& text);

// Writes manifest.json and one .f32 file per manifest layer tag. Throws
// missing_layer_file when a tag has no matrix, dimension_mismatch or
// row_count_mismatch when a matrix disagrees with the manifest, and
// non_finite on NaN/Inf.
void write_store(const std::filesystem::path& dir, const EmbeddingManifest& manifest,
                 std::span<const LayerMatrix> matrices);

struct StoreIssue {
    ErrorCode code = ErrorCode::invalid_argument;
    std::string layer_tag;
    std::optional<std::size_t> row;
    std::optional<std::size_t> column;
    std::string message;
};

struct ValidationReport {
    std::vector<StoreIssue> issues;
    std::size_t layers_checked = 0;

    bool ok() const noexcept { return issues.empty(); }
};

// Checks manifest density, layer file presence, file sizes against dim and
// record count, and NaN/Inf (reporting the first bad cell per layer).
ValidationReport validate(const std::filesystem::path& dir);

/// Read-only handle on a store directory.
class EmbeddingStore {
public:
    static EmbeddingStore open(const std::filesystem::path& dir);

    const EmbeddingManifest& manifest() const noexcept { return manifest_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::size_t rows() const noexcept { return manifest_.records.size(); }
    std::size_t dim() const noexcept { return manifest_.dim; }

    // Seeks into the layer file; throws missing_layer_file / row_count_mismatch.
    std::vector<float> read_row(const std::string& layer_tag, std::size_t row_index) const;
    // Whole layer, checked for size and finiteness.
    LayerMatrix load_layer(const std::string& layer_tag) const;

    std::optional<std::size_t> row_of(std::int64_t occurrence_id) const;

private:
    std::filesystem::path dir_;
    EmbeddingManifest manifest_;
    std::unordered_map<std::int64_t, std::size_t> row_by_id_;
};

std::vector<float> read_row(const std::filesystem::path& dir, const std::string& layer_tag, std::size_t row_index);

// Throws record_mismatch unless both manifests list the same occurrence ids in
// the same row order and share layer tags and dim.
void require_same_records(const EmbeddingManifest& a, const EmbeddingManifest& b);

// ---- attention dumps ----
//
// File: uint32 layers, uint32 heads, uint32 n (little-endian), then
// layers*heads*n*n float32 weights ordered [layer][head][row][col].

struct AttentionDump {
    std::string example_id;
    std::uint32_t layers = 0;
    std::uint32_t heads = 0;
    std::uint32_t length = 0;
    std::vector<float> weights;

    AttentionDump() = default;
    AttentionDump(std::string id, std::uint32_t n_layers, std::uint32_t n_heads, std::uint32_t n)
        : example_id(std::move(id)), layers(n_layers), heads(n_heads), length(n),
          weights(static_cast<std::size_t>(n_layers) * n_heads * n * n, 0.0f) {}

    std::size_t matrix_size() const noexcept { return static_cast<std::size_t>(length) * length; }
    std::span<float> matrix(std::size_t layer, std::size_t head) {
        return {weights.data() + (layer * heads + head) * matrix_size(), matrix_size()};
    }
    std::span<const float> matrix(std::size_t layer, std::size_t head) const {
        return {weights.data() + (layer * heads + head) * matrix_size(), matrix_size()};
    }
};

void write_attention(const std::filesystem::path& file, const AttentionDump& dump);
// example_id is taken from the file stem.
AttentionDump read_attention(const std::filesystem::path& file);
// Every *.attn file in a directory, sorted by example id.
std::vector<AttentionDump> read_attention_dir(const std::filesystem::path& dir);

// First row whose sum deviates from 1 by more than `tolerance`, if any.
std::optional<StoreIssue> check_row_stochastic(const AttentionDump& dump, double tolerance = 1e-4);

}  // namespace scprobe
