#include "binary_io.hpp"
#include "text_util.hpp"

#include <fstream>
#include <sstream>

#include "scprobe/error.hpp"

namespace scprobe::detail {

namespace {

template <typename T>
void write_scalar(std::ostream& out, T value) {
    const auto le = byteswap_if_big(value);
    out.write(reinterpret_cast<const char*>(&le), sizeof(T));
}

template <typename T>
bool read_scalar(std::istream& in, T& value) {
    T raw{};
    if (!in.read(reinterpret_cast<char*>(&raw), sizeof(T))) {
        return false;
    }
    value = byteswap_if_big(raw);
    return true;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t value) { write_scalar(out, value); }
void write_i32(std::ostream& out, std::int32_t value) { write_scalar(out, value); }
void write_u64(std::ostream& out, std::uint64_t value) { write_scalar(out, value); }

void write_f32s(std::ostream& out, std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size_bytes()));
    } else {
        for (float v : values) {
            write_scalar(out, std::bit_cast<std::uint32_t>(v));
        }
    }
}

bool read_u32(std::istream& in, std::uint32_t& value) { return read_scalar(in, value); }
bool read_i32(std::istream& in, std::int32_t& value) { return read_scalar(in, value); }
bool read_u64(std::istream& in, std::uint64_t& value) { return read_scalar(in, value); }

bool read_f32s(std::istream& in, std::span<float> values) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size_bytes()))) {
        return false;
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : values) {
            v = std::bit_cast<float>(byteswap_if_big(std::bit_cast<std::uint32_t>(v)));
        }
    }
    return true;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorCode::missing_input, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        fail(ErrorCode::io_error, "cannot write " + path.string());
    }
}

}  // namespace scprobe::detail

namespace scprobe::detail {

std::string read_file_or_fail(const std::filesystem::path& path) { return read_text_file(path); }

}  // namespace scprobe::detail
