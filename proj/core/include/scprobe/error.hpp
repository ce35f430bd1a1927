#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scprobe {

// Stable, machine-readable failure categories. The CLI maps each one to an
// exit status and prints `code_name(code)` as the first token of its error line.
enum class ErrorCode {
    invalid_argument,
    parse_error,
    unknown_class,
    missing_input,
    missing_layer_file,
    dimension_mismatch,
    row_count_mismatch,
    non_finite,
    out_of_vocabulary,
    missing_row,
    missing_probe,
    divergence,
    record_mismatch,
    example_mismatch,
    zero_norm,
    io_error,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace scprobe
