#include "scprobe/attnsim.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "scprobe/error.hpp"

namespace scprobe {

double flattened_cosine(std::span<const float> a, std::span<const float> b, std::size_t n, std::size_t valid) {
    if (a.size() != n * n || b.size() != n * n) {
        fail(ErrorCode::dimension_mismatch, "attention matrices must both be n x n");
    }
    if (valid > n) {
        fail(ErrorCode::invalid_argument, "valid length exceeds matrix size");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < valid; ++i) {
        for (std::size_t j = 0; j < valid; ++j) {
            const double x = a[i * n + j];
            const double y = b[i * n + j];
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
    }
    if (na == 0.0 || nb == 0.0) {
        fail(ErrorCode::zero_norm, "cosine of a zero attention matrix");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

AttnSimGrid build_grid(std::span<const AttentionDump> a, std::span<const AttentionDump> b,
                       std::span<const std::string> sample) {
    std::map<std::string, const AttentionDump*> left;
    std::map<std::string, const AttentionDump*> right;
    for (const auto& d : a) {
        left.emplace(d.example_id, &d);
    }
    for (const auto& d : b) {
        right.emplace(d.example_id, &d);
    }
    std::vector<std::string> ids;
    if (sample.empty()) {
        for (const auto& [id, _] : left) {
            if (!right.count(id)) {
                fail(ErrorCode::example_mismatch, "example '" + id + "' is missing from the second dump set");
            }
            ids.push_back(id);
        }
        for (const auto& [id, _] : right) {
            if (!left.count(id)) {
                fail(ErrorCode::example_mismatch, "example '" + id + "' is missing from the first dump set");
            }
        }
    } else {
        for (const auto& id : sample) {
            if (!left.count(id) || !right.count(id)) {
                fail(ErrorCode::example_mismatch, "sampled example '" + id + "' is not in both dump sets");
            }
            ids.push_back(id);
        }
    }
    if (ids.empty()) {
        fail(ErrorCode::example_mismatch, "no shared examples to compare");
    }

    AttnSimGrid grid;
    const auto& first = *left.at(ids.front());
    grid.layers = first.layers;
    grid.heads = first.heads;
    grid.mean.assign(grid.layers * grid.heads, 0.0);
    for (const auto& id : ids) {
        const auto& x = *left.at(id);
        const auto& y = *right.at(id);
        if (x.layers != grid.layers || x.heads != grid.heads || y.layers != x.layers || y.heads != x.heads ||
            y.length != x.length) {
            fail(ErrorCode::dimension_mismatch, "example '" + id + "' has inconsistent attention shapes");
        }
        for (std::size_t l = 0; l < grid.layers; ++l) {
            for (std::size_t h = 0; h < grid.heads; ++h) {
                grid.mean[l * grid.heads + h] += flattened_cosine(x.matrix(l, h), y.matrix(l, h), x.length);
            }
        }
    }
    grid.examples = ids.size();
    for (auto& v : grid.mean) {
        v /= static_cast<double>(grid.examples);
    }
    return grid;
}

void write_grid_csv(std::ostream& out, const AttnSimGrid& grid) {
    out << "layer,head,mean_cosine,n_examples\n";
    char buf[32];
    for (std::size_t l = 0; l < grid.layers; ++l) {
        for (std::size_t h = 0; h < grid.heads; ++h) {
            std::snprintf(buf, sizeof buf, "%.9f", grid.at(l, h));
            out << l << ',' << h << ',' << buf << ',' << grid.examples << '\n';
        }
    }
}

}  // namespace scprobe
