#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scprobe {

enum class Split { train = 0, dev = 1, test = 2 };

inline constexpr std::array<Split, 3> all_splits{Split::train, Split::dev, Split::test};

std::string_view split_name(Split split) noexcept;
std::optional<Split> find_split(std::string_view name) noexcept;
// Throws ErrorCode::invalid_argument on an unknown tag.
Split parse_split(std::string_view name);

/// Ordered semantic-class names plus the word -> classes mapping.
///
/// Class indices are positions in `classes()`. Words are keyed by their
/// surface form; multiword phrases use single spaces between members.
class SClassInventory {
public:
    SClassInventory() = default;
    explicit SClassInventory(std::vector<std::string> classes);

    const std::vector<std::string>& classes() const noexcept { return classes_; }
    std::size_t size() const noexcept { return classes_.size(); }
    const std::string& name(int class_index) const;

    std::optional<int> find_class(std::string_view name) const;
    // Throws ErrorCode::unknown_class.
    int index_of(std::string_view name) const;

    // Adds (or merges into) a word's class set. Indices must be < size().
    void add_word(const std::string& word, std::span<const int> class_indices);

    // Sorted class indices of a word, or nullptr when the word is absent.
    const std::vector<int>* classes_of(std::string_view word) const;
    bool has_class(std::string_view word, int class_index) const;

    const std::map<std::string, std::vector<int>, std::less<>>& word_to_classes() const noexcept {
        return word_to_classes_;
    }

private:
    std::vector<std::string> classes_;
    std::unordered_map<std::string, int> class_index_;
    std::map<std::string, std::vector<int>, std::less<>> word_to_classes_;
};

// Inventory TSV: first line `#classes<TAB>name,name,...` giving the ordered
// class list, then one `word<TAB>class,class,...` row per word.
SClassInventory read_inventory(std::istream& in);
SClassInventory read_inventory(const std::filesystem::path& path);
void write_inventory(std::ostream& out, const SClassInventory& inventory);

/// Inclusive token index range.
struct TokenSpan {
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const noexcept { return last - first + 1; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct ContextOccurrence {
    std::int64_t occurrence_id = 0;
    std::string word;
    int sclass = 0;
    std::vector<std::string> tokens;
    TokenSpan target_span;
    Split split = Split::train;

    friend bool operator==(const ContextOccurrence&, const ContextOccurrence&) = default;
};

// Joins tokens[span] with single spaces.
std::string span_text(std::span<const std::string> tokens, TokenSpan span);

// Throws ErrorCode::invalid_argument when span, class or surface tokens are inconsistent.
void check_occurrence(const ContextOccurrence& occurrence, const SClassInventory& inventory);

/// How `@word@` style annotations are written in a raw corpus line.
///
/// A line is `[split<TAB>]token token ...`. An annotated token is
/// `@a_b@` (phrase members joined by `phrase_joiner`) optionally followed by
/// `/class`. Without an explicit class the word must have exactly one class in
/// the inventory.
struct MarkerConvention {
    char marker = '@';
    char label_separator = '/';
    char phrase_joiner = '_';
    Split default_split = Split::train;
    std::int64_t first_id = 0;
};

struct Reject {
    std::size_t line_number = 0;
    std::string reason;
    std::string detail;
};

struct ParseResult {
    std::vector<ContextOccurrence> occurrences;
    std::vector<Reject> rejects;
    std::size_t lines_read = 0;
    std::size_t lines_skipped = 0;
};

// Unparseable lines are skipped and reported; markers that cannot be resolved
// against the inventory are reported individually. An explicit label naming a
// class outside the inventory throws ErrorCode::unknown_class.
ParseResult parse_annotated_corpus(std::istream& in, const SClassInventory& inventory,
                                   const MarkerConvention& convention = {});

struct WordSClassCombination {
    std::string word;
    int sclass = 0;
    Split split = Split::train;
    std::vector<std::int64_t> occurrence_ids;

    friend bool operator==(const WordSClassCombination&, const WordSClassCombination&) = default;
};

inline constexpr std::size_t default_max_contexts = 100;

// Groups by (word, sclass, split) in first-appearance order and keeps at most
// max_contexts occurrences per group. Oversized groups are subsampled without
// replacement with a generator seeded from (seed, group key); kept ids stay in
// input order.
std::vector<WordSClassCombination> sample_combinations(std::span<const ContextOccurrence> occurrences,
                                                       std::size_t max_contexts = default_max_contexts,
                                                       std::uint64_t seed = 0);

enum class SplitGranularity { word, combination };

/// Sampled combinations and their occurrences, partitioned by split.
class ProbingDataset {
public:
    ProbingDataset() = default;
    // Validates that every combination's occurrences exist and agree on
    // (word, sclass, split). Occurrences not referenced by a combination are dropped.
    ProbingDataset(SClassInventory inventory, std::vector<WordSClassCombination> combinations,
                   std::vector<ContextOccurrence> occurrences);

    const SClassInventory& inventory() const noexcept { return inventory_; }
    std::span<const WordSClassCombination> combinations(Split split) const noexcept {
        return combinations_[static_cast<std::size_t>(split)];
    }
    std::span<const ContextOccurrence> occurrences(Split split) const noexcept {
        return occurrences_[static_cast<std::size_t>(split)];
    }
    const ContextOccurrence* find_occurrence(std::int64_t occurrence_id) const;

    // Sorted unique words of a split.
    std::vector<std::string> words(Split split) const;

    std::vector<WordSClassCombination> all_combinations() const;
    std::vector<ContextOccurrence> all_occurrences() const;

private:
    SClassInventory inventory_;
    std::array<std::vector<WordSClassCombination>, 3> combinations_;
    std::array<std::vector<ContextOccurrence>, 3> occurrences_;
    std::unordered_map<std::int64_t, std::pair<Split, std::size_t>> index_;
};

struct SplitOptions {
    double dev_fraction = 0.2;
    std::uint64_t seed = 0;
    SplitGranularity granularity = SplitGranularity::word;
};

// Moves round(dev_fraction * |train units|) train units (words by default) to
// dev; test is left untouched. Throws ErrorCode::invalid_argument when
// dev_fraction is outside (0, 1) or a word occurs in both train and test.
ProbingDataset make_splits(SClassInventory inventory, std::span<const WordSClassCombination> combinations,
                           std::span<const ContextOccurrence> occurrences, const SplitOptions& options = {});

// Copy of the occurrence cropped to the target span plus up to k tokens on each side.
ContextOccurrence window_context(const ContextOccurrence& occurrence, std::size_t k);

// ---- canonical JSONL and dataset directories ----

std::string occurrence_to_json(const ContextOccurrence& occurrence);
ContextOccurrence occurrence_from_json(std::string_view line, const SClassInventory& inventory);

void write_occurrences_jsonl(std::ostream& out, std::span<const ContextOccurrence> occurrences);
// Blank lines are ignored; malformed records throw ErrorCode::parse_error with the line number.
std::vector<ContextOccurrence> read_occurrences_jsonl(std::istream& in, const SClassInventory& inventory);

void write_combinations_jsonl(std::ostream& out, std::span<const WordSClassCombination> combinations);
std::vector<WordSClassCombination> read_combinations_jsonl(std::istream& in, const SClassInventory& inventory);

void write_rejects_jsonl(std::ostream& out, std::span<const Reject> rejects);

// Directory layout: inventory.tsv, occurrences.jsonl, combinations.jsonl.
void save_dataset(const ProbingDataset& dataset, const std::filesystem::path& dir);
ProbingDataset load_dataset(const std::filesystem::path& dir);

}  // namespace scprobe
