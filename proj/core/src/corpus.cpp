#include "scprobe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "scprobe/error.hpp"
#include "scprobe/random.hpp"
#include "text_util.hpp"

namespace scprobe {

std::string_view split_name(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

std::optional<Split> find_split(std::string_view name) noexcept {
    for (Split s : all_splits) {
        if (split_name(s) == name) {
            return s;
        }
    }
    return std::nullopt;
}

Split parse_split(std::string_view name) {
    if (auto s = find_split(name)) {
        return *s;
    }
    fail(ErrorCode::invalid_argument, "unknown split '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- inventory

SClassInventory::SClassInventory(std::vector<std::string> classes) : classes_(std::move(classes)) {
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].empty()) {
            fail(ErrorCode::invalid_argument, "empty class name at index " + std::to_string(i));
        }
        if (!class_index_.emplace(classes_[i], static_cast<int>(i)).second) {
            fail(ErrorCode::invalid_argument, "duplicate class name '" + classes_[i] + "'");
        }
    }
}

const std::string& SClassInventory::name(int class_index) const {
    if (class_index < 0 || static_cast<std::size_t>(class_index) >= classes_.size()) {
        fail(ErrorCode::unknown_class, "class index " + std::to_string(class_index) + " out of range");
    }
    return classes_[static_cast<std::size_t>(class_index)];
}

std::optional<int> SClassInventory::find_class(std::string_view name) const {
    auto it = class_index_.find(std::string(name));
    if (it == class_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

int SClassInventory::index_of(std::string_view name) const {
    if (auto idx = find_class(name)) {
        return *idx;
    }
    fail(ErrorCode::unknown_class, "unknown class '" + std::string(name) + "'");
}

void SClassInventory::add_word(const std::string& word, std::span<const int> class_indices) {
    if (word.empty()) {
        fail(ErrorCode::invalid_argument, "empty word in inventory");
    }
    if (class_indices.empty()) {
        fail(ErrorCode::invalid_argument, "word '" + word + "' has no classes");
    }
    auto& entry = word_to_classes_[word];
    for (int c : class_indices) {
        if (c < 0 || static_cast<std::size_t>(c) >= classes_.size()) {
            fail(ErrorCode::unknown_class, "class index " + std::to_string(c) + " out of range for word '" + word + "'");
        }
        entry.push_back(c);
    }
    std::sort(entry.begin(), entry.end());
    entry.erase(std::unique(entry.begin(), entry.end()), entry.end());
}

const std::vector<int>* SClassInventory::classes_of(std::string_view word) const {
    auto it = word_to_classes_.find(word);
    return it == word_to_classes_.end() ? nullptr : &it->second;
}

bool SClassInventory::has_class(std::string_view word, int class_index) const {
    const auto* classes = classes_of(word);
    return classes != nullptr && std::binary_search(classes->begin(), classes->end(), class_index);
}

SClassInventory read_inventory(std::istream& in) {
    std::string line;
    std::size_t line_number = 0;
    std::optional<SClassInventory> inventory;
    while (std::getline(in, line)) {
        ++line_number;
        detail::strip_cr(line);
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            fail(ErrorCode::parse_error, "inventory line " + std::to_string(line_number) + ": expected a tab");
        }
        const std::string key = line.substr(0, tab);
        const auto names = detail::split(std::string_view(line).substr(tab + 1), ',');
        if (!inventory) {
            if (key != "#classes") {
                fail(ErrorCode::parse_error, "inventory line " + std::to_string(line_number) +
                                                 ": expected '#classes' header before word rows");
            }
            std::vector<std::string> classes;
            for (auto n : names) {
                classes.emplace_back(detail::trim(n));
            }
            inventory.emplace(std::move(classes));
            continue;
        }
        std::vector<int> indices;
        for (auto n : names) {
            const auto trimmed = detail::trim(n);
            if (!trimmed.empty()) {
                indices.push_back(inventory->index_of(trimmed));
            }
        }
        inventory->add_word(key, indices);
    }
    if (!inventory) {
        fail(ErrorCode::parse_error, "inventory has no '#classes' header");
    }
    return std::move(*inventory);
}

SClassInventory read_inventory(const std::filesystem::path& path) {
    std::istringstream in(detail::read_file_or_fail(path));
    return read_inventory(in);
}

void write_inventory(std::ostream& out, const SClassInventory& inventory) {
    out << "#classes\t";
    for (std::size_t i = 0; i < inventory.size(); ++i) {
        out << (i ? "," : "") << inventory.classes()[i];
    }
    out << '\n';
    for (const auto& [word, classes] : inventory.word_to_classes()) {
        out << word << '\t';
        for (std::size_t i = 0; i < classes.size(); ++i) {
            out << (i ? "," : "") << inventory.classes()[static_cast<std::size_t>(classes[i])];
        }
        out << '\n';
    }
}

// -------------------------------------------------------------- occurrences

std::string span_text(std::span<const std::string> tokens, TokenSpan span) {
    std::string text;
    for (std::size_t i = span.first; i <= span.last && i < tokens.size(); ++i) {
        if (i != span.first) {
            text += ' ';
        }
        text += tokens[i];
    }
    return text;
}

void check_occurrence(const ContextOccurrence& occurrence, const SClassInventory& inventory) {
    const auto id = std::to_string(occurrence.occurrence_id);
    if (occurrence.target_span.first > occurrence.target_span.last ||
        occurrence.target_span.last >= occurrence.tokens.size()) {
        fail(ErrorCode::invalid_argument, "occurrence " + id + ": target span out of token bounds");
    }
    if (occurrence.sclass < 0 || static_cast<std::size_t>(occurrence.sclass) >= inventory.size()) {
        fail(ErrorCode::unknown_class, "occurrence " + id + ": class index out of range");
    }
    if (span_text(occurrence.tokens, occurrence.target_span) != occurrence.word) {
        fail(ErrorCode::invalid_argument, "occurrence " + id + ": tokens at target span do not spell '" +
                                              occurrence.word + "'");
    }
}

namespace {

struct MarkerToken {
    std::vector<std::string> members;
    std::string label;  // empty when absent
};

enum class TokenKind { plain, marker, malformed };

TokenKind classify_token(std::string_view token, const MarkerConvention& conv, MarkerToken& parsed) {
    if (token.empty() || token.front() != conv.marker) {
        return TokenKind::plain;
    }
    const auto close = token.find(conv.marker, 1);
    if (close == std::string_view::npos) {
        return TokenKind::malformed;
    }
    const auto body = token.substr(1, close - 1);
    auto rest = token.substr(close + 1);
    parsed = {};
    if (!rest.empty()) {
        if (rest.front() != conv.label_separator || rest.size() == 1) {
            return TokenKind::malformed;
        }
        parsed.label = std::string(rest.substr(1));
    }
    for (auto member : detail::split(body, conv.phrase_joiner)) {
        if (member.empty()) {
            return TokenKind::malformed;
        }
        parsed.members.emplace_back(member);
    }
    if (parsed.members.empty()) {
        return TokenKind::malformed;
    }
    return TokenKind::marker;
}

}  // namespace

ParseResult parse_annotated_corpus(std::istream& in, const SClassInventory& inventory,
                                   const MarkerConvention& convention) {
    ParseResult result;
    std::int64_t next_id = convention.first_id;
    std::string line;
    while (std::getline(in, line)) {
        ++result.lines_read;
        const std::size_t line_number = result.lines_read;
        detail::strip_cr(line);
        std::string_view text = line;
        Split split = convention.default_split;
        if (const auto tab = text.find('\t'); tab != std::string_view::npos) {
            const auto tag = detail::trim(text.substr(0, tab));
            auto parsed_split = find_split(tag);
            if (!parsed_split) {
                result.rejects.push_back({line_number, "bad_split", std::string(tag)});
                ++result.lines_skipped;
                continue;
            }
            split = *parsed_split;
            text = text.substr(tab + 1);
        }

        struct Pending {
            TokenSpan span;
            std::string word;
            std::string label;
        };
        std::vector<std::string> tokens;
        std::vector<Pending> pending;
        bool malformed = false;
        std::string malformed_token;
        for (auto raw : detail::split_whitespace(text)) {
            MarkerToken marker;
            switch (classify_token(raw, convention, marker)) {
                case TokenKind::plain:
                    tokens.emplace_back(raw);
                    break;
                case TokenKind::malformed:
                    malformed = true;
                    malformed_token = std::string(raw);
                    break;
                case TokenKind::marker: {
                    Pending p;
                    p.span.first = tokens.size();
                    for (auto& m : marker.members) {
                        if (!p.word.empty()) {
                            p.word += ' ';
                        }
                        p.word += m;
                        tokens.push_back(std::move(m));
                    }
                    p.span.last = tokens.size() - 1;
                    p.label = std::move(marker.label);
                    pending.push_back(std::move(p));
                    break;
                }
            }
            if (malformed) {
                break;
            }
        }
        if (malformed) {
            result.rejects.push_back({line_number, "malformed_marker", malformed_token});
            ++result.lines_skipped;
            continue;
        }

        for (auto& p : pending) {
            const auto* classes = inventory.classes_of(p.word);
            int sclass = -1;
            if (!p.label.empty()) {
                sclass = inventory.index_of(p.label);  // unknown class name is a hard error
                if (classes == nullptr) {
                    result.rejects.push_back({line_number, "no_inventory_entry", p.word});
                    continue;
                }
                if (!std::binary_search(classes->begin(), classes->end(), sclass)) {
                    result.rejects.push_back({line_number, "label_not_in_inventory_entry", p.word + "/" + p.label});
                    continue;
                }
            } else {
                if (classes == nullptr) {
                    result.rejects.push_back({line_number, "no_inventory_entry", p.word});
                    continue;
                }
                if (classes->size() != 1) {
                    result.rejects.push_back({line_number, "ambiguous_class", p.word});
                    continue;
                }
                sclass = classes->front();
            }
            ContextOccurrence occ;
            occ.occurrence_id = next_id++;
            occ.word = p.word;
            occ.sclass = sclass;
            occ.tokens = tokens;
            occ.target_span = p.span;
            occ.split = split;
            result.occurrences.push_back(std::move(occ));
        }
    }
    return result;
}

// ----------------------------------------------------------------- sampling

std::vector<WordSClassCombination> sample_combinations(std::span<const ContextOccurrence> occurrences,
                                                       std::size_t max_contexts, std::uint64_t seed) {
    if (max_contexts == 0) {
        fail(ErrorCode::invalid_argument, "max_contexts must be at least 1");
    }
    using Key = std::tuple<std::string, int, Split>;
    std::map<Key, std::size_t> group_of;
    std::vector<WordSClassCombination> groups;
    for (const auto& occ : occurrences) {
        Key key{occ.word, occ.sclass, occ.split};
        auto [it, inserted] = group_of.try_emplace(key, groups.size());
        if (inserted) {
            groups.push_back({occ.word, occ.sclass, occ.split, {}});
        }
        groups[it->second].occurrence_ids.push_back(occ.occurrence_id);
    }

    for (auto& group : groups) {
        auto& ids = group.occurrence_ids;
        if (ids.size() <= max_contexts) {
            continue;
        }
        const std::string key = group.word + '\x1f' + std::to_string(group.sclass) + '\x1f' +
                                std::string(split_name(group.split));
        Rng rng(derive_seed(seed, key));
        std::vector<std::size_t> positions(ids.size());
        std::iota(positions.begin(), positions.end(), std::size_t{0});
        // partial Fisher-Yates: the first max_contexts slots are a uniform sample
        for (std::size_t i = 0; i < max_contexts; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_below(rng, positions.size() - i));
            std::swap(positions[i], positions[j]);
        }
        positions.resize(max_contexts);
        std::sort(positions.begin(), positions.end());
        std::vector<std::int64_t> kept;
        kept.reserve(max_contexts);
        for (auto p : positions) {
            kept.push_back(ids[p]);
        }
        ids = std::move(kept);
    }
    return groups;
}

// ------------------------------------------------------------------ dataset

ProbingDataset::ProbingDataset(SClassInventory inventory, std::vector<WordSClassCombination> combinations,
                               std::vector<ContextOccurrence> occurrences)
    : inventory_(std::move(inventory)) {
    std::unordered_map<std::int64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        if (!by_id.emplace(occurrences[i].occurrence_id, i).second) {
            fail(ErrorCode::invalid_argument,
                 "duplicate occurrence_id " + std::to_string(occurrences[i].occurrence_id));
        }
    }
    std::vector<char> referenced(occurrences.size(), 0);
    for (auto& combo : combinations) {
        if (combo.occurrence_ids.empty()) {
            fail(ErrorCode::invalid_argument, "combination '" + combo.word + "' has no occurrences");
        }
        for (auto id : combo.occurrence_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                fail(ErrorCode::missing_row, "combination '" + combo.word + "' references unknown occurrence_id " +
                                                 std::to_string(id));
            }
            const auto& occ = occurrences[it->second];
            if (occ.word != combo.word || occ.sclass != combo.sclass || occ.split != combo.split) {
                fail(ErrorCode::invalid_argument, "occurrence " + std::to_string(id) +
                                                      " disagrees with its combination '" + combo.word + "'");
            }
            if (referenced[it->second]) {
                fail(ErrorCode::invalid_argument, "occurrence " + std::to_string(id) + " listed twice");
            }
            referenced[it->second] = 1;
        }
        combinations_[static_cast<std::size_t>(combo.split)].push_back(std::move(combo));
    }
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        if (!referenced[i]) {
            continue;
        }
        check_occurrence(occurrences[i], inventory_);
        auto& bucket = occurrences_[static_cast<std::size_t>(occurrences[i].split)];
        index_.emplace(occurrences[i].occurrence_id, std::pair{occurrences[i].split, bucket.size()});
        bucket.push_back(std::move(occurrences[i]));
    }
}

const ContextOccurrence* ProbingDataset::find_occurrence(std::int64_t occurrence_id) const {
    auto it = index_.find(occurrence_id);
    if (it == index_.end()) {
        return nullptr;
    }
    return &occurrences_[static_cast<std::size_t>(it->second.first)][it->second.second];
}

std::vector<std::string> ProbingDataset::words(Split split) const {
    std::set<std::string> unique;
    for (const auto& c : combinations(split)) {
        unique.insert(c.word);
    }
    return {unique.begin(), unique.end()};
}

std::vector<WordSClassCombination> ProbingDataset::all_combinations() const {
    std::vector<WordSClassCombination> out;
    for (Split s : all_splits) {
        auto part = combinations(s);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<ContextOccurrence> ProbingDataset::all_occurrences() const {
    std::vector<ContextOccurrence> out;
    for (Split s : all_splits) {
        auto part = occurrences(s);
        out.insert(out.end(), part.begin(), part.end());
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.occurrence_id < b.occurrence_id; });
    return out;
}

ProbingDataset make_splits(SClassInventory inventory, std::span<const WordSClassCombination> combinations,
                           std::span<const ContextOccurrence> occurrences, const SplitOptions& options) {
    if (!(options.dev_fraction > 0.0 && options.dev_fraction < 1.0)) {
        fail(ErrorCode::invalid_argument, "dev_fraction must lie in (0, 1)");
    }

    std::set<std::string> test_words;
    std::set<std::string> train_words;
    for (const auto& c : combinations) {
        (c.split == Split::test ? test_words : train_words).insert(c.word);
    }
    for (const auto& w : train_words) {
        if (test_words.count(w)) {
            fail(ErrorCode::invalid_argument, "word '" + w + "' occurs in both train and test");
        }
    }

    std::vector<WordSClassCombination> out(combinations.begin(), combinations.end());
    Rng rng(derive_seed(options.seed, "make_splits"));
    std::set<std::int64_t> moved_ids;

    if (options.granularity == SplitGranularity::word) {
        std::vector<std::string> candidates;
        for (const auto& c : out) {
            if (c.split == Split::train) {
                candidates.push_back(c.word);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        shuffle(std::span(candidates), rng);
        const auto n_dev = static_cast<std::size_t>(std::llround(options.dev_fraction * candidates.size()));
        const std::set<std::string> dev_words(candidates.begin(), candidates.begin() + n_dev);
        for (auto& c : out) {
            if (c.split == Split::train && dev_words.count(c.word)) {
                c.split = Split::dev;
                moved_ids.insert(c.occurrence_ids.begin(), c.occurrence_ids.end());
            }
        }
    } else {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].split == Split::train) {
                candidates.push_back(i);
            }
        }
        shuffle(std::span(candidates), rng);
        const auto n_dev = static_cast<std::size_t>(std::llround(options.dev_fraction * candidates.size()));
        for (std::size_t i = 0; i < n_dev; ++i) {
            auto& c = out[candidates[i]];
            c.split = Split::dev;
            moved_ids.insert(c.occurrence_ids.begin(), c.occurrence_ids.end());
        }
    }

    std::vector<ContextOccurrence> occ(occurrences.begin(), occurrences.end());
    for (auto& o : occ) {
        if (o.split == Split::train && moved_ids.count(o.occurrence_id)) {
            o.split = Split::dev;
        }
    }
    return ProbingDataset(std::move(inventory), std::move(out), std::move(occ));
}

ContextOccurrence window_context(const ContextOccurrence& occurrence, std::size_t k) {
    const auto& span = occurrence.target_span;
    const std::size_t first = span.first > k ? span.first - k : 0;
    const std::size_t last = std::min(occurrence.tokens.size() - 1, span.last + k);
    ContextOccurrence out;
    out.occurrence_id = occurrence.occurrence_id;
    out.word = occurrence.word;
    out.sclass = occurrence.sclass;
    out.split = occurrence.split;
    out.tokens.assign(occurrence.tokens.begin() + static_cast<std::ptrdiff_t>(first),
                      occurrence.tokens.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    out.target_span = {span.first - first, span.last - first};
    return out;
}

}  // namespace scprobe
