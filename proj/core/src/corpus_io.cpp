#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "scprobe/corpus.hpp"
#include "scprobe/error.hpp"
#include "text_util.hpp"

namespace scprobe {

using nlohmann::json;

namespace {

int class_from_json(const json& value, const SClassInventory& inventory) {
    if (value.is_string()) {
        return inventory.index_of(value.get<std::string>());
    }
    const int index = value.get<int>();
    inventory.name(index);  // range check
    return index;
}

[[noreturn]] void parse_fail(std::size_t line_number, const std::string& what) {
    fail(ErrorCode::parse_error, "line " + std::to_string(line_number) + ": " + what);
}

}  // namespace

std::string occurrence_to_json(const ContextOccurrence& occurrence) {
    json j;
    j["occurrence_id"] = occurrence.occurrence_id;
    j["word"] = occurrence.word;
    j["sclass"] = occurrence.sclass;
    j["tokens"] = occurrence.tokens;
    j["target_span"] = json::array({occurrence.target_span.first, occurrence.target_span.last});
    j["split"] = split_name(occurrence.split);
    return j.dump();
}

ContextOccurrence occurrence_from_json(std::string_view line, const SClassInventory& inventory) {
    const json j = json::parse(line);
    ContextOccurrence occ;
    occ.occurrence_id = j.at("occurrence_id").get<std::int64_t>();
    occ.word = j.at("word").get<std::string>();
    occ.sclass = class_from_json(j.at("sclass"), inventory);
    occ.tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto& span = j.at("target_span");
    if (!span.is_array() || span.size() != 2) {
        fail(ErrorCode::parse_error, "target_span must be a two-element array");
    }
    occ.target_span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
    occ.split = parse_split(j.at("split").get<std::string>());
    check_occurrence(occ, inventory);
    return occ;
}

void write_occurrences_jsonl(std::ostream& out, std::span<const ContextOccurrence> occurrences) {
    for (const auto& occ : occurrences) {
        out << occurrence_to_json(occ) << '\n';
    }
}

std::vector<ContextOccurrence> read_occurrences_jsonl(std::istream& in, const SClassInventory& inventory) {
    std::vector<ContextOccurrence> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (detail::trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(occurrence_from_json(line, inventory));
        } catch (const json::exception& e) {
            parse_fail(line_number, e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::unknown_class) {
                throw;
            }
            parse_fail(line_number, e.what());
        }
    }
    return out;
}

void write_combinations_jsonl(std::ostream& out, std::span<const WordSClassCombination> combinations) {
    for (const auto& c : combinations) {
        json j;
        j["word"] = c.word;
        j["sclass"] = c.sclass;
        j["split"] = split_name(c.split);
        j["occurrence_ids"] = c.occurrence_ids;
        out << j.dump() << '\n';
    }
}

std::vector<WordSClassCombination> read_combinations_jsonl(std::istream& in, const SClassInventory& inventory) {
    std::vector<WordSClassCombination> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (detail::trim(line).empty()) {
            continue;
        }
        try {
            const json j = json::parse(line);
            WordSClassCombination c;
            c.word = j.at("word").get<std::string>();
            c.sclass = class_from_json(j.at("sclass"), inventory);
            c.split = parse_split(j.at("split").get<std::string>());
            c.occurrence_ids = j.at("occurrence_ids").get<std::vector<std::int64_t>>();
            out.push_back(std::move(c));
        } catch (const json::exception& e) {
            parse_fail(line_number, e.what());
        }
    }
    return out;
}

void write_rejects_jsonl(std::ostream& out, std::span<const Reject> rejects) {
    for (const auto& r : rejects) {
        json j;
        j["line"] = r.line_number;
        j["reason"] = r.reason;
        j["detail"] = r.detail;
        out << j.dump() << '\n';
    }
}

void save_dataset(const ProbingDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream inventory;
    write_inventory(inventory, dataset.inventory());
    detail::write_text_file(dir / "inventory.tsv", inventory.str());

    std::ostringstream occurrences;
    write_occurrences_jsonl(occurrences, dataset.all_occurrences());
    detail::write_text_file(dir / "occurrences.jsonl", occurrences.str());

    std::ostringstream combinations;
    write_combinations_jsonl(combinations, dataset.all_combinations());
    detail::write_text_file(dir / "combinations.jsonl", combinations.str());
}

ProbingDataset load_dataset(const std::filesystem::path& dir) {
    auto inventory = read_inventory(dir / "inventory.tsv");
    std::istringstream occ_in(detail::read_text_file(dir / "occurrences.jsonl"));
    auto occurrences = read_occurrences_jsonl(occ_in, inventory);
    std::istringstream comb_in(detail::read_text_file(dir / "combinations.jsonl"));
    auto combinations = read_combinations_jsonl(comb_in, inventory);
    return ProbingDataset(std::move(inventory), std::move(combinations), std::move(occurrences));
}

}  // namespace scprobe
