#include "scprobe/wordpiece.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "scprobe/error.hpp"
#include "text_util.hpp"

namespace scprobe {

WordpieceTokenizer::WordpieceTokenizer(std::vector<std::string> vocab, bool lowercase, std::string unknown,
                                       std::size_t max_chars_per_word)
    : vocab_(std::make_move_iterator(vocab.begin()), std::make_move_iterator(vocab.end())),
      lowercase_(lowercase),
      unknown_(std::move(unknown)),
      max_chars_(max_chars_per_word) {}

std::vector<std::string> WordpieceTokenizer::tokenize_word(std::string_view raw) const {
    std::string word(raw);
    if (lowercase_) {
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    if (word.empty()) {
        return {};
    }
    if (word.size() > max_chars_) {
        return {unknown_};
    }
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::string match;
        while (end > start) {
            std::string candidate = word.substr(start, end - start);
            if (start > 0) {
                candidate.insert(0, "##");
            }
            if (vocab_.count(candidate)) {
                match = std::move(candidate);
                break;
            }
            --end;
        }
        if (match.empty()) {
            return {unknown_};
        }
        pieces.push_back(std::move(match));
        start = end;
    }
    return pieces;
}

std::vector<std::string> WordpieceTokenizer::tokenize(const std::vector<std::string>& words) const {
    std::vector<std::string> out;
    for (const auto& w : words) {
        auto pieces = tokenize_word(w);
        out.insert(out.end(), std::make_move_iterator(pieces.begin()), std::make_move_iterator(pieces.end()));
    }
    return out;
}

WordpieceTokenizer load_wordpiece_vocab(const std::filesystem::path& path, bool lowercase) {
    std::istringstream in(detail::read_file_or_fail(path));
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        detail::strip_cr(line);
        if (!line.empty()) {
            vocab.push_back(line);
        }
    }
    return WordpieceTokenizer(std::move(vocab), lowercase);
}

}  // namespace scprobe
