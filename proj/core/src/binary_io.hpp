#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace scprobe::detail {

template <typename T>
T byteswap_if_big(T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return value;
    }
}

void write_u32(std::ostream& out, std::uint32_t value);
void write_i32(std::ostream& out, std::int32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
void write_f32s(std::ostream& out, std::span<const float> values);

bool read_u32(std::istream& in, std::uint32_t& value);
bool read_i32(std::istream& in, std::int32_t& value);
bool read_u64(std::istream& in, std::uint64_t& value);
bool read_f32s(std::istream& in, std::span<float> values);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace scprobe::detail
