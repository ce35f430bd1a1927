#include "scprobe/space.hpp"

#include <algorithm>
#include <cmath>

#include "scprobe/error.hpp"

namespace scprobe {

TypeLevelSpace::TypeLevelSpace(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {}

bool TypeLevelSpace::set(std::string_view word, std::span<const float> vector) {
    if (vector.size() != dim_) {
        fail(ErrorCode::dimension_mismatch, "vector for '" + std::string(word) + "' has dim " +
                                                std::to_string(vector.size()) + ", space has " + std::to_string(dim_));
    }
    auto [it, inserted] = index_.try_emplace(std::string(word), words_.size());
    if (inserted) {
        words_.emplace_back(word);
        data_.insert(data_.end(), vector.begin(), vector.end());
        return false;
    }
    std::copy(vector.begin(), vector.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
    return true;
}

bool TypeLevelSpace::contains(std::string_view word) const { return index_.count(std::string(word)) != 0; }

std::optional<std::span<const float>> TypeLevelSpace::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return vector(it->second);
}

std::span<const float> TypeLevelSpace::at(std::string_view word) const {
    if (auto v = find(word)) {
        return *v;
    }
    fail(ErrorCode::out_of_vocabulary, "'" + std::string(word) + "' is not in space '" + name_ + "'");
}

void TypeLevelSpace::check_finite() const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
        auto v = vector(i);
        for (std::size_t j = 0; j < dim_; ++j) {
            if (!std::isfinite(v[j])) {
                fail(ErrorCode::non_finite, "non-finite value for '" + words_[i] + "' at column " + std::to_string(j));
            }
        }
    }
}

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) {
        s += static_cast<double>(x) * x;
    }
    return std::sqrt(s);
}

}  // namespace

std::vector<Neighbor> nearest_neighbors(const TypeLevelSpace& space, std::span<const float> query, std::size_t k,
                                        std::string_view exclude) {
    if (query.size() != space.dim()) {
        fail(ErrorCode::dimension_mismatch, "query dim does not match space dim");
    }
    const double qn = norm(query);
    std::vector<Neighbor> all;
    all.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (!exclude.empty() && space.word(i) == exclude) {
            continue;
        }
        const auto v = space.vector(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            dot += static_cast<double>(query[j]) * v[j];
        }
        const double denom = qn * norm(v);
        all.push_back({space.word(i), denom > 0.0 ? dot / denom : 0.0});
    }
    const auto by_rank = [](const Neighbor& a, const Neighbor& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.word < b.word;
    };
    const std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), by_rank);
    all.resize(keep);
    return all;
}

std::vector<Neighbor> nearest_neighbors(const TypeLevelSpace& space, std::string_view query, std::size_t k) {
    return nearest_neighbors(space, space.at(query), k, query);
}

}  // namespace scprobe
