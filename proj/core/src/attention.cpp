#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "scprobe/embedstore.hpp"

namespace scprobe {

namespace fs = std::filesystem;

void write_attention(const fs::path& file, const AttentionDump& dump) {
    if (dump.weights.size() != static_cast<std::size_t>(dump.layers) * dump.heads * dump.matrix_size()) {
        fail(ErrorCode::dimension_mismatch, "attention dump '" + dump.example_id + "' has wrong weight count");
    }
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    detail::write_u32(out, dump.layers);
    detail::write_u32(out, dump.heads);
    detail::write_u32(out, dump.length);
    detail::write_f32s(out, dump.weights);
    if (!out) {
        fail(ErrorCode::io_error, "failed writing " + file.string());
    }
}

AttentionDump read_attention(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        fail(ErrorCode::missing_input, "cannot open " + file.string());
    }
    std::uint32_t layers = 0;
    std::uint32_t heads = 0;
    std::uint32_t length = 0;
    if (!detail::read_u32(in, layers) || !detail::read_u32(in, heads) || !detail::read_u32(in, length)) {
        fail(ErrorCode::parse_error, file.string() + ": truncated header");
    }
    const auto expected = 12 + static_cast<std::uintmax_t>(layers) * heads * length * length * sizeof(float);
    if (fs::file_size(file) != expected) {
        fail(ErrorCode::dimension_mismatch, file.string() + ": size does not match header (" +
                                                std::to_string(layers) + "," + std::to_string(heads) + "," +
                                                std::to_string(length) + ")");
    }
    AttentionDump dump(file.stem().string(), layers, heads, length);
    if (!detail::read_f32s(in, dump.weights)) {
        fail(ErrorCode::io_error, file.string() + ": short read");
    }
    return dump;
}

std::vector<AttentionDump> read_attention_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        fail(ErrorCode::missing_input, "attention directory " + dir.string() + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".attn") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.stem() < b.stem(); });
    std::vector<AttentionDump> dumps;
    dumps.reserve(files.size());
    for (const auto& f : files) {
        dumps.push_back(read_attention(f));
    }
    return dumps;
}

std::optional<StoreIssue> check_row_stochastic(const AttentionDump& dump, double tolerance) {
    const std::size_t n = dump.length;
    for (std::size_t l = 0; l < dump.layers; ++l) {
        for (std::size_t h = 0; h < dump.heads; ++h) {
            const auto m = dump.matrix(l, h);
            for (std::size_t i = 0; i < n; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    sum += m[i * n + j];
                }
                if (!std::isfinite(sum) || std::abs(sum - 1.0) > tolerance) {
                    return StoreIssue{ErrorCode::invalid_argument, dump.example_id, i, std::nullopt,
                                      "layer " + std::to_string(l) + " head " + std::to_string(h) + " row " +
                                          std::to_string(i) + " sums to " + std::to_string(sum)};
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace scprobe
