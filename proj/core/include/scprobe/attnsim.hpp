#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "scprobe/embedstore.hpp"

namespace scprobe {

// Cosine of two n x n attention matrices flattened to n^2-vectors, after
// cropping both to their leading `valid` x `valid` block (valid = n keeps all).
// Throws zero_norm when either cropped matrix is all zeros.
double flattened_cosine(std::span<const float> a, std::span<const float> b, std::size_t n, std::size_t valid);
inline double flattened_cosine(std::span<const float> a, std::span<const float> b, std::size_t n) {
    return flattened_cosine(a, b, n, n);
}

/// Mean per-example cosine similarity for every (layer, head).
struct AttnSimGrid {
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t examples = 0;
    std::vector<double> mean;  // layers x heads, row-major

    double at(std::size_t layer, std::size_t head) const { return mean[layer * heads + head]; }
};

// Pairs dumps by example id. Without a sample, both sides must hold exactly
// the same ids; with one, every sampled id must exist on both sides. Throws
// example_mismatch otherwise, and dimension_mismatch when a pair differs in
// (layers, heads, n).
AttnSimGrid build_grid(std::span<const AttentionDump> a, std::span<const AttentionDump> b,
                       std::span<const std::string> sample = {});

// CSV columns: layer,head,mean_cosine,n_examples
void write_grid_csv(std::ostream& out, const AttnSimGrid& grid);

}  // namespace scprobe
