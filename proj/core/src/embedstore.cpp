#include "scprobe/embedstore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace scprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t float_bytes = sizeof(float);

fs::path layer_path(const fs::path& dir, const std::string& tag) { return dir / (tag + ".f32"); }

void check_tag(const std::string& tag) {
    if (tag.empty() || tag.find('/') != std::string::npos || tag.find('\\') != std::string::npos ||
        tag == "." || tag == "..") {
        fail(ErrorCode::invalid_argument, "invalid layer tag '" + tag + "'");
    }
}

std::optional<std::pair<std::size_t, std::size_t>> first_non_finite(std::span<const float> data, std::size_t cols) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            return std::pair{i / cols, i % cols};
        }
    }
    return std::nullopt;
}

}  // namespace

std::string EmbeddingManifest::context_size_label() const {
    return context_size ? std::to_string(*context_size) : std::string("full");
}

bool EmbeddingManifest::has_layer(std::string_view tag) const {
    return std::find(layer_tags.begin(), layer_tags.end(), tag) != layer_tags.end();
}

EmbeddingManifest make_manifest(std::string dataset_id, std::string encoder_id, std::vector<std::string> layer_tags,
                                std::size_t dim, std::span<const ContextOccurrence> occurrences,
                                std::optional<std::size_t> context_size) {
    EmbeddingManifest m;
    m.dataset_id = std::move(dataset_id);
    m.encoder_id = std::move(encoder_id);
    m.layer_tags = std::move(layer_tags);
    m.dim = dim;
    m.context_size = context_size;
    m.records.reserve(occurrences.size());
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        const auto& o = occurrences[i];
        m.records.push_back({i, o.occurrence_id, o.word, o.sclass, o.split});
    }
    return m;
}

std::string manifest_to_json(const EmbeddingManifest& manifest) {
    json j;
    j["dataset_id"] = manifest.dataset_id;
    j["encoder_id"] = manifest.encoder_id;
    j["layer_tags"] = manifest.layer_tags;
    j["dim"] = manifest.dim;
    if (manifest.context_size) {
        j["context_size"] = *manifest.context_size;
    } else {
        j["context_size"] = "full";
    }
    json records = json::array();
    for (const auto& r : manifest.records) {
        records.push_back({{"row_index", r.row_index},
                           {"occurrence_id", r.occurrence_id},
                           {"word", r.word},
                           {"sclass", r.sclass},
                           {"split", split_name(r.split)}});
    }
    j["records"] = std::move(records);
    return j.dump(1) + "\n";
}

EmbeddingManifest manifest_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        EmbeddingManifest m;
        m.dataset_id = j.at("dataset_id").get<std::string>();
        m.encoder_id = j.at("encoder_id").get<std::string>();
        m.layer_tags = j.at("layer_tags").get<std::vector<std::string>>();
        m.dim = j.at("dim").get<std::size_t>();
        const auto& ctx = j.at("context_size");
        if (ctx.is_string()) {
            if (ctx.get<std::string>() != "full") {
                fail(ErrorCode::parse_error, "context_size must be an integer or \"full\"");
            }
        } else {
            m.context_size = ctx.get<std::size_t>();
        }
        for (const auto& r : j.at("records")) {
            m.records.push_back({r.at("row_index").get<std::size_t>(), r.at("occurrence_id").get<std::int64_t>(),
                                 r.at("word").get<std::string>(), r.at("sclass").get<int>(),
                                 parse_split(r.at("split").get<std::string>())});
        }
        return m;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, std::string("manifest: ") + e.what());
    }
}

void write_store(const fs::path& dir, const EmbeddingManifest& manifest, std::span<const LayerMatrix> matrices) {
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].row_index != i) {
            fail(ErrorCode::invalid_argument, "manifest row_index must be dense 0..N-1");
        }
    }
    std::vector<const LayerMatrix*> ordered;
    for (const auto& tag : manifest.layer_tags) {
        check_tag(tag);
        auto it = std::find_if(matrices.begin(), matrices.end(), [&](const auto& m) { return m.layer_tag == tag; });
        if (it == matrices.end()) {
            fail(ErrorCode::missing_layer_file, "no matrix for layer '" + tag + "'");
        }
        if (it->cols != manifest.dim || it->data.size() != it->rows * it->cols) {
            fail(ErrorCode::dimension_mismatch, "layer '" + tag + "' has width " + std::to_string(it->cols) +
                                                    ", manifest dim is " + std::to_string(manifest.dim));
        }
        if (it->rows != manifest.records.size()) {
            fail(ErrorCode::row_count_mismatch, "layer '" + tag + "' has " + std::to_string(it->rows) +
                                                    " rows, manifest has " + std::to_string(manifest.records.size()));
        }
        if (auto bad = first_non_finite(it->data, it->cols)) {
            fail(ErrorCode::non_finite, "layer '" + tag + "' row " + std::to_string(bad->first) + " column " +
                                            std::to_string(bad->second) + " is not finite");
        }
        ordered.push_back(&*it);
    }

    fs::create_directories(dir);
    for (const auto* m : ordered) {
        std::ofstream out(layer_path(dir, m->layer_tag), std::ios::binary | std::ios::trunc);
        detail::write_f32s(out, m->data);
        if (!out) {
            fail(ErrorCode::io_error, "failed writing layer '" + m->layer_tag + "'");
        }
    }
    detail::write_text_file(dir / "manifest.json", manifest_to_json(manifest));
}

ValidationReport validate(const fs::path& dir) {
    ValidationReport report;
    EmbeddingManifest manifest;
    try {
        manifest = manifest_from_json(detail::read_text_file(dir / "manifest.json"));
    } catch (const Error& e) {
        report.issues.push_back({e.code(), {}, {}, {}, e.what()});
        return report;
    }
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].row_index != i) {
            report.issues.push_back({ErrorCode::invalid_argument, {}, i, {}, "row_index is not dense"});
            break;
        }
    }
    if (manifest.dim == 0) {
        report.issues.push_back({ErrorCode::dimension_mismatch, {}, {}, {}, "manifest dim is 0"});
        return report;
    }
    const std::size_t row_bytes = manifest.dim * float_bytes;
    for (const auto& tag : manifest.layer_tags) {
        ++report.layers_checked;
        const auto path = layer_path(dir, tag);
        std::error_code ec;
        const auto size = fs::file_size(path, ec);
        if (ec) {
            report.issues.push_back({ErrorCode::missing_layer_file, tag, {}, {}, "missing " + path.string()});
            continue;
        }
        if (size % row_bytes != 0) {
            report.issues.push_back({ErrorCode::dimension_mismatch, tag, {}, {},
                                     "file size " + std::to_string(size) + " is not a multiple of dim*4"});
            continue;
        }
        const auto rows = static_cast<std::size_t>(size / row_bytes);
        if (rows != manifest.records.size()) {
            report.issues.push_back({ErrorCode::row_count_mismatch, tag, {}, {},
                                     "layer has " + std::to_string(rows) + " rows, manifest has " +
                                         std::to_string(manifest.records.size())});
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        std::vector<float> row(manifest.dim);
        for (std::size_t r = 0; r < rows; ++r) {
            if (!detail::read_f32s(in, row)) {
                report.issues.push_back({ErrorCode::io_error, tag, r, {}, "short read"});
                break;
            }
            if (auto bad = first_non_finite(row, manifest.dim)) {
                report.issues.push_back({ErrorCode::non_finite, tag, r, bad->second,
                                         "non-finite value at row " + std::to_string(r) + " column " +
                                             std::to_string(bad->second)});
                break;
            }
        }
    }
    return report;
}

EmbeddingStore EmbeddingStore::open(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        fail(ErrorCode::missing_input, "no manifest.json in " + dir.string());
    }
    EmbeddingStore store;
    store.dir_ = dir;
    store.manifest_ = manifest_from_json(detail::read_text_file(dir / "manifest.json"));
    for (const auto& r : store.manifest_.records) {
        if (!store.row_by_id_.emplace(r.occurrence_id, r.row_index).second) {
            fail(ErrorCode::invalid_argument, "duplicate occurrence_id " + std::to_string(r.occurrence_id) +
                                                  " in manifest");
        }
    }
    return store;
}

std::vector<float> EmbeddingStore::read_row(const std::string& layer_tag, std::size_t row_index) const {
    if (!manifest_.has_layer(layer_tag)) {
        fail(ErrorCode::missing_layer_file, "store has no layer '" + layer_tag + "'");
    }
    if (row_index >= rows()) {
        fail(ErrorCode::row_count_mismatch, "row " + std::to_string(row_index) + " out of range");
    }
    std::ifstream in(layer_path(dir_, layer_tag), std::ios::binary);
    if (!in) {
        fail(ErrorCode::missing_layer_file, "cannot open layer '" + layer_tag + "'");
    }
    in.seekg(static_cast<std::streamoff>(row_index * dim() * float_bytes));
    std::vector<float> row(dim());
    if (!detail::read_f32s(in, row)) {
        fail(ErrorCode::row_count_mismatch, "layer '" + layer_tag + "' is shorter than the manifest");
    }
    return row;
}

LayerMatrix EmbeddingStore::load_layer(const std::string& layer_tag) const {
    if (!manifest_.has_layer(layer_tag)) {
        fail(ErrorCode::missing_layer_file, "store has no layer '" + layer_tag + "'");
    }
    const auto path = layer_path(dir_, layer_tag);
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) {
        fail(ErrorCode::missing_layer_file, "missing " + path.string());
    }
    if (size != rows() * dim() * float_bytes) {
        fail(ErrorCode::row_count_mismatch, "layer '" + layer_tag + "' size " + std::to_string(size) +
                                                " does not match manifest");
    }
    LayerMatrix m(layer_tag, rows(), dim());
    std::ifstream in(path, std::ios::binary);
    if (!detail::read_f32s(in, m.data)) {
        fail(ErrorCode::io_error, "short read on layer '" + layer_tag + "'");
    }
    if (auto bad = first_non_finite(m.data, m.cols)) {
        fail(ErrorCode::non_finite, "layer '" + layer_tag + "' row " + std::to_string(bad->first) + " column " +
                                        std::to_string(bad->second) + " is not finite");
    }
    return m;
}

std::optional<std::size_t> EmbeddingStore::row_of(std::int64_t occurrence_id) const {
    auto it = row_by_id_.find(occurrence_id);
    if (it == row_by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<float> read_row(const fs::path& dir, const std::string& layer_tag, std::size_t row_index) {
    return EmbeddingStore::open(dir).read_row(layer_tag, row_index);
}

void require_same_records(const EmbeddingManifest& a, const EmbeddingManifest& b) {
    if (a.dim != b.dim) {
        fail(ErrorCode::record_mismatch, "stores differ in dim");
    }
    if (a.layer_tags != b.layer_tags) {
        fail(ErrorCode::record_mismatch, "stores differ in layer tags");
    }
    if (a.records.size() != b.records.size()) {
        fail(ErrorCode::record_mismatch, "stores differ in record count");
    }
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (a.records[i].occurrence_id != b.records[i].occurrence_id) {
            fail(ErrorCode::record_mismatch, "record order differs at row " + std::to_string(i));
        }
    }
}

}  // namespace scprobe
