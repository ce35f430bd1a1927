#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scprobe {

/// One vector per word (uncontextualized embedding space).
///
/// Words keep insertion order; vectors are stored contiguously.
class TypeLevelSpace {
public:
    TypeLevelSpace() = default;
    TypeLevelSpace(std::string name, std::size_t dim);

    const std::string& name() const noexcept { return name_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return words_.size(); }
    bool empty() const noexcept { return words_.empty(); }

    // Inserts or replaces. Returns true when an existing vector was replaced.
    bool set(std::string_view word, std::span<const float> vector);

    bool contains(std::string_view word) const;
    std::optional<std::span<const float>> find(std::string_view word) const;
    // Throws ErrorCode::out_of_vocabulary.
    std::span<const float> at(std::string_view word) const;

    const std::string& word(std::size_t i) const { return words_[i]; }
    std::span<const float> vector(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<const std::string> words() const noexcept { return words_; }

    // Throws ErrorCode::non_finite naming the first bad (word, column).
    void check_finite() const;

private:
    std::string name_;
    std::size_t dim_ = 0;
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<float> data_;
};

struct Neighbor {
    std::string word;
    double similarity = 0.0;
};

// k words with the highest cosine similarity to the query word, excluding the
// query itself; ties break by word. Zero vectors have similarity 0.
// Throws ErrorCode::out_of_vocabulary for an unknown query.
std::vector<Neighbor> nearest_neighbors(const TypeLevelSpace& space, std::string_view query, std::size_t k);

// Same, for an arbitrary query vector; `exclude` (if non-empty) is skipped.
std::vector<Neighbor> nearest_neighbors(const TypeLevelSpace& space, std::span<const float> query, std::size_t k,
                                        std::string_view exclude = {});

}  // namespace scprobe
