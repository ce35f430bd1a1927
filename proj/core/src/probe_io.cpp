#include <fstream>

#include "binary_io.hpp"
#include "scprobe/error.hpp"
#include "scprobe/probe.hpp"

namespace scprobe {

namespace fs = std::filesystem;

namespace {

constexpr std::uintmax_t header_bytes = 4 + 4 + 4 + 8;

}  // namespace

void save_probe(const fs::path& file, const ProbeModel& model) {
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    detail::write_i32(out, model.class_index);
    detail::write_u32(out, static_cast<std::uint32_t>(model.dim_in()));
    detail::write_u32(out, static_cast<std::uint32_t>(model.hidden()));
    detail::write_u64(out, model.init_seed);
    auto params = model.params;
    params.for_each_tensor([&](std::span<float> t) { detail::write_f32s(out, t); });
    if (!out) {
        fail(ErrorCode::io_error, "failed writing probe checkpoint " + file.string());
    }
}

ProbeModel load_probe(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        fail(ErrorCode::missing_probe, "cannot open probe checkpoint " + file.string());
    }
    std::int32_t class_index = 0;
    std::uint32_t dim_in = 0;
    std::uint32_t hidden = 0;
    std::uint64_t seed = 0;
    if (!detail::read_i32(in, class_index) || !detail::read_u32(in, dim_in) || !detail::read_u32(in, hidden) ||
        !detail::read_u64(in, seed)) {
        fail(ErrorCode::parse_error, file.string() + ": truncated probe header");
    }
    const auto expected = header_bytes + probe_parameter_count(dim_in, hidden) * sizeof(float);
    if (dim_in == 0 || hidden == 0 || fs::file_size(file) != expected) {
        fail(ErrorCode::dimension_mismatch, file.string() + ": size does not match header");
    }
    ProbeModel model;
    model.class_index = class_index;
    model.init_seed = seed;
    model.params = MlpParameters<float>::zeros(dim_in, hidden);
    bool ok = true;
    model.params.for_each_tensor([&](std::span<float> t) { ok = ok && detail::read_f32s(in, t); });
    if (!ok) {
        fail(ErrorCode::io_error, file.string() + ": short read");
    }
    if (!model.params.all_finite()) {
        fail(ErrorCode::non_finite, file.string() + ": non-finite weights");
    }
    return model;
}

fs::path probe_file_name(int class_index) { return "probe_" + std::to_string(class_index) + ".bin"; }

void save_probe_suite(const fs::path& dir, std::span<const ProbeModel> probes) {
    fs::create_directories(dir);
    for (const auto& p : probes) {
        save_probe(dir / probe_file_name(p.class_index), p);
    }
}

std::vector<ProbeModel> load_probe_suite(const fs::path& dir, std::size_t n_classes) {
    std::vector<ProbeModel> probes;
    probes.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto file = dir / probe_file_name(static_cast<int>(c));
        if (!fs::exists(file)) {
            fail(ErrorCode::missing_probe, "no probe for class " + std::to_string(c) + " in " + dir.string());
        }
        probes.push_back(load_probe(file));
        if (probes.back().class_index != static_cast<int>(c)) {
            fail(ErrorCode::missing_probe, file.string() + " holds class " +
                                               std::to_string(probes.back().class_index));
        }
    }
    return probes;
}

}  // namespace scprobe
