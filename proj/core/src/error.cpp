#include "scprobe/error.hpp"

namespace scprobe {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "INVALID_ARGUMENT";
        case ErrorCode::parse_error: return "PARSE_ERROR";
        case ErrorCode::unknown_class: return "UNKNOWN_CLASS";
        case ErrorCode::missing_input: return "MISSING_INPUT";
        case ErrorCode::missing_layer_file: return "MISSING_LAYER_FILE";
        case ErrorCode::dimension_mismatch: return "DIMENSION_MISMATCH";
        case ErrorCode::row_count_mismatch: return "ROW_COUNT_MISMATCH";
        case ErrorCode::non_finite: return "NON_FINITE";
        case ErrorCode::out_of_vocabulary: return "OUT_OF_VOCABULARY";
        case ErrorCode::missing_row: return "MISSING_ROW";
        case ErrorCode::missing_probe: return "MISSING_PROBE";
        case ErrorCode::divergence: return "DIVERGENCE";
        case ErrorCode::record_mismatch: return "RECORD_MISMATCH";
        case ErrorCode::example_mismatch: return "EXAMPLE_MISMATCH";
        case ErrorCode::zero_norm: return "ZERO_NORM";
        case ErrorCode::io_error: return "IO_ERROR";
    }
    return "UNKNOWN";
}

}  // namespace scprobe
