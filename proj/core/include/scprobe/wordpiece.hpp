#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace scprobe {

/// Greedy longest-match-first subword tokenizer over a fixed vocabulary
/// (continuation pieces carry a "##" prefix), as used by BERT-style encoders.
class WordpieceTokenizer {
public:
    WordpieceTokenizer(std::vector<std::string> vocab, bool lowercase = true, std::string unknown = "[UNK]",
                       std::size_t max_chars_per_word = 100);

    // Pieces of one whitespace-free word; a word that cannot be covered maps to the unknown token.
    std::vector<std::string> tokenize_word(std::string_view word) const;
    // Concatenated pieces of every word.
    std::vector<std::string> tokenize(const std::vector<std::string>& words) const;

    bool contains(std::string_view piece) const { return vocab_.count(std::string(piece)) != 0; }
    const std::string& unknown_token() const noexcept { return unknown_; }

private:
    std::unordered_set<std::string> vocab_;
    bool lowercase_;
    std::string unknown_;
    std::size_t max_chars_;
};

// vocab.txt format: one piece per line.
WordpieceTokenizer load_wordpiece_vocab(const std::filesystem::path& path, bool lowercase = true);

}  // namespace scprobe
