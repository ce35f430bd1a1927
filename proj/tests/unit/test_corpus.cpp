#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "scprobe/corpus.hpp"
#include "scprobe/random.hpp"
#include "test_support.hpp"

using namespace scprobe;
using scprobe::testing::TempDir;

namespace {

SClassInventory small_inventory() {
    SClassInventory inv({"location", "organization", "art", "food"});
    const int art = 2;
    const int food = 3;
    const int loc_org[] = {0, 1};
    inv.add_word("goodfellas", std::span(&art, 1));
    inv.add_word("airheads", std::vector<int>{art, food});
    inv.add_word("apple", std::vector<int>{1, food});
    inv.add_word("new york", loc_org);
    inv.add_word("paris", std::vector<int>{0});
    return inv;
}

ContextOccurrence make_occ(std::int64_t id, std::string word, int sclass, Split split = Split::train) {
    ContextOccurrence o;
    o.occurrence_id = id;
    o.word = word;
    o.sclass = sclass;
    o.tokens = {"the", word, "."};
    o.target_span = {1, 1};
    o.split = split;
    return o;
}

std::vector<ContextOccurrence> occurrences_for(const std::string& word, int sclass, std::size_t n, std::int64_t first_id,
                                               Split split = Split::train) {
    std::vector<ContextOccurrence> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(make_occ(first_id + static_cast<std::int64_t>(i), word, sclass, split));
    }
    return out;
}

ParseResult parse(const std::string& text, const SClassInventory& inv) {
    std::istringstream in(text);
    return parse_annotated_corpus(in, inv);
}

}  // namespace

TEST(Inventory, IndicesFollowHeaderOrder) {
    const auto inv = small_inventory();
    EXPECT_EQ(inv.size(), 4u);
    EXPECT_EQ(inv.index_of("art"), 2);
    EXPECT_EQ(inv.name(3), "food");
    EXPECT_FALSE(inv.find_class("person").has_value());
    EXPECT_SCPROBE_ERROR(inv.index_of("person"), ErrorCode::unknown_class);
}

TEST(Inventory, DuplicateClassNamesRejected) {
    EXPECT_SCPROBE_ERROR(SClassInventory({"a", "b", "a"}), ErrorCode::invalid_argument);
}

TEST(Inventory, AddWordMergesAndSorts) {
    SClassInventory inv({"a", "b", "c"});
    inv.add_word("w", std::vector<int>{2});
    inv.add_word("w", std::vector<int>{0, 2});
    ASSERT_NE(inv.classes_of("w"), nullptr);
    EXPECT_EQ(*inv.classes_of("w"), (std::vector<int>{0, 2}));
    EXPECT_TRUE(inv.has_class("w", 0));
    EXPECT_FALSE(inv.has_class("w", 1));
    EXPECT_SCPROBE_ERROR(inv.add_word("x", std::vector<int>{3}), ErrorCode::unknown_class);
}

TEST(Inventory, TsvRoundTrip) {
    const auto inv = small_inventory();
    std::ostringstream out;
    write_inventory(out, inv);
    EXPECT_EQ(out.str().rfind("#classes\tlocation,organization,art,food\n", 0), 0u);
    std::istringstream in(out.str());
    const auto back = read_inventory(in);
    EXPECT_EQ(back.classes(), inv.classes());
    EXPECT_EQ(back.word_to_classes(), inv.word_to_classes());
}

TEST(Inventory, TsvUnknownClassIsError) {
    std::istringstream in("#classes\ta,b\nword\tc\n");
    EXPECT_SCPROBE_ERROR(read_inventory(in), ErrorCode::unknown_class);
}

TEST(Inventory, TsvMissingHeaderIsParseError) {
    std::istringstream in("word\ta\n");
    EXPECT_SCPROBE_ERROR(read_inventory(in), ErrorCode::parse_error);
}

TEST(ParseCorpus, GoodfellasLine) {
    const auto inv = small_inventory();
    const auto r = parse("so they wanted imperioli because he had been in @goodfellas@/art .\n", inv);
    ASSERT_EQ(r.occurrences.size(), 1u);
    const auto& o = r.occurrences[0];
    EXPECT_EQ(o.word, "goodfellas");
    EXPECT_EQ(o.sclass, inv.index_of("art"));
    EXPECT_EQ(o.tokens[o.target_span.first], "goodfellas");
    EXPECT_EQ(o.target_span, (TokenSpan{9, 9}));
    EXPECT_EQ(o.tokens.size(), 11u);
    EXPECT_TRUE(r.rejects.empty());
}

TEST(ParseCorpus, UnlabeledMarkerUsesSingleInventoryClass) {
    const auto inv = small_inventory();
    const auto r = parse("he had been in @goodfellas@ .\n", inv);
    ASSERT_EQ(r.occurrences.size(), 1u);
    EXPECT_EQ(r.occurrences[0].sclass, inv.index_of("art"));
}

TEST(ParseCorpus, ZeroMarkersGiveZeroOccurrences) {
    const auto r = parse("a line without any annotation .\n", small_inventory());
    EXPECT_TRUE(r.occurrences.empty());
    EXPECT_TRUE(r.rejects.empty());
    EXPECT_EQ(r.lines_read, 1u);
}

TEST(ParseCorpus, TwoMarkersShareTokensWithDistinctSpans) {
    const auto inv = small_inventory();
    const auto r = parse("test\t@airheads@/food is sold in @new_york@/location shops\n", inv);
    ASSERT_EQ(r.occurrences.size(), 2u);
    const auto& a = r.occurrences[0];
    const auto& b = r.occurrences[1];
    const std::vector<std::string> tokens{"airheads", "is", "sold", "in", "new", "york", "shops"};
    EXPECT_EQ(a.tokens, tokens);
    EXPECT_EQ(b.tokens, tokens);
    EXPECT_EQ(a.target_span, (TokenSpan{0, 0}));
    EXPECT_EQ(b.target_span, (TokenSpan{4, 5}));
    EXPECT_EQ(b.word, "new york");
    EXPECT_EQ(a.split, Split::test);
    EXPECT_NE(a.occurrence_id, b.occurrence_id);
    EXPECT_EQ(span_text(b.tokens, b.target_span), "new york");
}

TEST(ParseCorpus, RejectsAreReportedNotFatal) {
    const auto inv = small_inventory();
    const std::string text =
        "@unknownword@ here\n"        // no inventory entry
        "@airheads@ twice\n"          // ambiguous without label
        "@paris@/food dinner\n"       // label outside the word's classes
        "bogus\t@paris@ x\n"          // bad split tag
        "@broken here\n"              // malformed marker
        "@paris@ fine\n";
    const auto r = parse(text, inv);
    ASSERT_EQ(r.occurrences.size(), 1u);
    EXPECT_EQ(r.occurrences[0].word, "paris");
    ASSERT_EQ(r.rejects.size(), 5u);
    EXPECT_EQ(r.rejects[0].reason, "no_inventory_entry");
    EXPECT_EQ(r.rejects[1].reason, "ambiguous_class");
    EXPECT_EQ(r.rejects[2].reason, "label_not_in_inventory_entry");
    EXPECT_EQ(r.rejects[3].reason, "bad_split");
    EXPECT_EQ(r.rejects[4].reason, "malformed_marker");
    EXPECT_EQ(r.rejects[4].line_number, 5u);
    EXPECT_EQ(r.lines_skipped, 2u);
    EXPECT_EQ(r.lines_read, 6u);

    std::ostringstream out;
    write_rejects_jsonl(out, r.rejects);
    EXPECT_NE(out.str().find("\"reason\":\"malformed_marker\""), std::string::npos);
}

TEST(ParseCorpus, UnknownClassLabelIsHardError) {
    EXPECT_SCPROBE_ERROR(parse("@paris@/planet x\n", small_inventory()), ErrorCode::unknown_class);
}

TEST(CheckOccurrence, DetectsInconsistencies) {
    const auto inv = small_inventory();
    auto o = make_occ(0, "paris", 0);
    EXPECT_NO_THROW(check_occurrence(o, inv));
    auto bad_span = o;
    bad_span.target_span = {2, 3};
    EXPECT_SCPROBE_ERROR(check_occurrence(bad_span, inv), ErrorCode::invalid_argument);
    auto bad_tokens = o;
    bad_tokens.tokens[1] = "london";
    EXPECT_SCPROBE_ERROR(check_occurrence(bad_tokens, inv), ErrorCode::invalid_argument);
    auto bad_class = o;
    bad_class.sclass = 9;
    EXPECT_SCPROBE_ERROR(check_occurrence(bad_class, inv), ErrorCode::unknown_class);
}

TEST(Sampling, LargeGroupCappedAtMax) {
    const auto occs = occurrences_for("france", 0, 98582, 0);
    const auto combos = sample_combinations(occs, 100, 3);
    ASSERT_EQ(combos.size(), 1u);
    EXPECT_EQ(combos[0].occurrence_ids.size(), 100u);
    EXPECT_TRUE(std::is_sorted(combos[0].occurrence_ids.begin(), combos[0].occurrence_ids.end()));
    const std::set<std::int64_t> unique(combos[0].occurrence_ids.begin(), combos[0].occurrence_ids.end());
    EXPECT_EQ(unique.size(), 100u);
}

TEST(Sampling, SmallGroupKeptWholeInInputOrder) {
    auto occs = occurrences_for("airheads", 2, 47, 100);
    std::reverse(occs.begin(), occs.end());
    const auto combos = sample_combinations(occs, 100, 3);
    ASSERT_EQ(combos.size(), 1u);
    ASSERT_EQ(combos[0].occurrence_ids.size(), 47u);
    for (std::size_t i = 0; i < 47; ++i) {
        EXPECT_EQ(combos[0].occurrence_ids[i], occs[i].occurrence_id);
    }
}

TEST(Sampling, DeterministicForSeed) {
    auto occs = occurrences_for("a", 0, 300, 0);
    auto more = occurrences_for("b", 1, 250, 1000);
    occs.insert(occs.end(), more.begin(), more.end());
    const auto first = sample_combinations(occs, 100, 11);
    const auto second = sample_combinations(occs, 100, 11);
    EXPECT_EQ(first, second);
    const auto other = sample_combinations(occs, 100, 12);
    EXPECT_NE(first[0].occurrence_ids, other[0].occurrence_ids);
}

TEST(Sampling, GroupsAreKeyedByWordClassAndSplit) {
    std::vector<ContextOccurrence> occs;
    occs.push_back(make_occ(0, "apple", 1));
    occs.push_back(make_occ(1, "apple", 3));
    occs.push_back(make_occ(2, "apple", 1));
    occs.push_back(make_occ(3, "apple", 1, Split::test));
    const auto combos = sample_combinations(occs);
    ASSERT_EQ(combos.size(), 3u);
    EXPECT_EQ(combos[0].occurrence_ids, (std::vector<std::int64_t>{0, 2}));
    EXPECT_EQ(combos[1].sclass, 3);
    EXPECT_EQ(combos[2].split, Split::test);
}

TEST(Sampling, SubsampleIsRoughlyUniform) {
    // every position should be kept with probability 100/400 across seeds
    const auto occs = occurrences_for("w", 0, 400, 0);
    std::vector<int> hits(400, 0);
    const int trials = 200;
    for (int s = 0; s < trials; ++s) {
        const auto combos = sample_combinations(occs, 100, static_cast<std::uint64_t>(s));
        for (auto id : combos[0].occurrence_ids) {
            ++hits[static_cast<std::size_t>(id)];
        }
    }
    const int first_quarter = std::accumulate(hits.begin(), hits.begin() + 100, 0);
    const int last_quarter = std::accumulate(hits.end() - 100, hits.end(), 0);
    EXPECT_NEAR(first_quarter, trials * 25, trials * 25 * 0.1);
    EXPECT_NEAR(last_quarter, trials * 25, trials * 25 * 0.1);
}

TEST(Sampling, ZeroMaxIsError) {
    const auto occs = occurrences_for("w", 0, 3, 0);
    EXPECT_SCPROBE_ERROR(sample_combinations(occs, 0), ErrorCode::invalid_argument);
}

namespace {

struct SyntheticInput {
    SClassInventory inventory;
    std::vector<ContextOccurrence> occurrences;
    std::vector<WordSClassCombination> combinations;
};

SyntheticInput random_input(std::uint64_t seed, std::size_t n_train_words, std::size_t n_test_words) {
    Rng rng(seed);
    SyntheticInput in;
    in.inventory = SClassInventory({"c0", "c1", "c2", "c3"});
    std::int64_t id = 0;
    for (std::size_t w = 0; w < n_train_words + n_test_words; ++w) {
        const std::string word = "w" + std::to_string(w);
        const Split split = w < n_train_words ? Split::train : Split::test;
        const auto n_classes = 1 + uniform_below(rng, 3);
        for (std::uint64_t c = 0; c < n_classes; ++c) {
            const int cls = static_cast<int>(c);
            in.inventory.add_word(word, std::span(&cls, 1));
            for (std::uint64_t i = 0; i < 1 + uniform_below(rng, 4); ++i) {
                in.occurrences.push_back(make_occ(id++, word, cls, split));
            }
        }
    }
    in.combinations = sample_combinations(in.occurrences);
    return in;
}

}  // namespace

TEST(Splits, TwentyPercentOfHundredWords) {
    const auto in = random_input(1, 100, 30);
    const auto ds = make_splits(in.inventory, in.combinations, in.occurrences, {0.2, 5});
    const auto dev = ds.words(Split::dev);
    const auto train = ds.words(Split::train);
    EXPECT_EQ(dev.size(), 20u);
    EXPECT_EQ(train.size(), 80u);
    EXPECT_EQ(ds.words(Split::test).size(), 30u);
    std::vector<std::string> overlap;
    std::set_intersection(dev.begin(), dev.end(), train.begin(), train.end(), std::back_inserter(overlap));
    EXPECT_TRUE(overlap.empty());
}

TEST(Splits, AllCombinationsOfDevWordMoveTogether) {
    SClassInventory inv({"a", "b", "c"});
    std::vector<ContextOccurrence> occs;
    std::int64_t id = 0;
    for (int w = 0; w < 10; ++w) {
        const std::string word = "word" + std::to_string(w);
        for (int c = 0; c < 3; ++c) {
            inv.add_word(word, std::span(&c, 1));
            occs.push_back(make_occ(id++, word, c));
        }
    }
    const auto combos = sample_combinations(occs);
    const auto ds = make_splits(inv, combos, occs, {0.2, 9});
    ASSERT_EQ(ds.words(Split::dev).size(), 2u);
    EXPECT_EQ(ds.combinations(Split::dev).size(), 6u);
    for (const auto& c : ds.combinations(Split::dev)) {
        EXPECT_EQ(std::count_if(ds.combinations(Split::dev).begin(), ds.combinations(Split::dev).end(),
                                [&](const auto& d) { return d.word == c.word; }),
                  3);
    }
    for (const auto& o : ds.occurrences(Split::dev)) {
        EXPECT_EQ(o.split, Split::dev);
    }
}

TEST(Splits, PropertyWordDisjointAndDeterministic) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto in = random_input(seed + 100, 5 + seed * 3, 4);
        const auto a = make_splits(in.inventory, in.combinations, in.occurrences, {0.2, seed});
        const auto b = make_splits(in.inventory, in.combinations, in.occurrences, {0.2, seed});
        EXPECT_EQ(a.all_combinations(), b.all_combinations());
        std::set<std::string> seen;
        for (Split s : all_splits) {
            for (const auto& w : a.words(s)) {
                EXPECT_TRUE(seen.insert(w).second) << "word " << w << " in two splits, seed " << seed;
            }
        }
        for (Split s : all_splits) {
            for (const auto& c : a.combinations(s)) {
                for (auto id : c.occurrence_ids) {
                    const auto* o = a.find_occurrence(id);
                    ASSERT_NE(o, nullptr);
                    EXPECT_EQ(o->word, c.word);
                    EXPECT_EQ(o->sclass, c.sclass);
                    EXPECT_EQ(o->split, s);
                }
            }
        }
    }
}

TEST(Splits, CombinationGranularity) {
    const auto in = random_input(4, 40, 0);
    const auto ds = make_splits(in.inventory, in.combinations, in.occurrences,
                                {0.25, 2, SplitGranularity::combination});
    const auto n_train = in.combinations.size();
    EXPECT_EQ(ds.combinations(Split::dev).size(), static_cast<std::size_t>(std::llround(0.25 * n_train)));
}

TEST(Splits, FractionOutsideOpenIntervalIsError) {
    const auto in = random_input(2, 10, 0);
    for (double f : {0.0, 1.0, -0.1, 1.5}) {
        EXPECT_SCPROBE_ERROR(make_splits(in.inventory, in.combinations, in.occurrences, {f, 0}),
                             ErrorCode::invalid_argument);
    }
}

TEST(Splits, WordInTrainAndTestIsError) {
    SClassInventory inv({"a"});
    inv.add_word("w", std::vector<int>{0});
    std::vector<ContextOccurrence> occs{make_occ(0, "w", 0), make_occ(1, "w", 0, Split::test)};
    const auto combos = sample_combinations(occs);
    EXPECT_SCPROBE_ERROR(make_splits(inv, combos, occs), ErrorCode::invalid_argument);
}

TEST(Dataset, UnreferencedOccurrencesAreDropped) {
    SClassInventory inv({"a"});
    inv.add_word("w", std::vector<int>{0});
    const auto occs = occurrences_for("w", 0, 5, 0);
    auto combos = sample_combinations(occs, 2, 0);
    ProbingDataset ds(inv, combos, occs);
    EXPECT_EQ(ds.occurrences(Split::train).size(), 2u);
    EXPECT_EQ(ds.find_occurrence(combos[0].occurrence_ids[0])->occurrence_id, combos[0].occurrence_ids[0]);
}

TEST(Dataset, CombinationDisagreeingWithOccurrenceIsError) {
    SClassInventory inv({"a", "b"});
    inv.add_word("w", std::vector<int>{0, 1});
    const auto occs = occurrences_for("w", 0, 2, 0);
    std::vector<WordSClassCombination> combos{{"w", 1, Split::train, {0, 1}}};
    EXPECT_SCPROBE_ERROR(ProbingDataset(inv, combos, occs), ErrorCode::invalid_argument);
    std::vector<WordSClassCombination> dangling{{"w", 0, Split::train, {7}}};
    EXPECT_SCPROBE_ERROR(ProbingDataset(inv, dangling, occs), ErrorCode::missing_row);
}

TEST(Window, ElevenTokensTargetFiveKTwo) {
    ContextOccurrence o;
    for (int i = 0; i < 11; ++i) {
        o.tokens.push_back("t" + std::to_string(i));
    }
    o.word = "t5";
    o.target_span = {5, 5};
    const auto w = window_context(o, 2);
    EXPECT_EQ(w.tokens, (std::vector<std::string>{"t3", "t4", "t5", "t6", "t7"}));
    EXPECT_EQ(w.target_span, (TokenSpan{2, 2}));
}

TEST(Window, KZeroKeepsTargetSpanOnly) {
    ContextOccurrence o;
    o.tokens = {"in", "new", "york", "today"};
    o.word = "new york";
    o.target_span = {1, 2};
    const auto w = window_context(o, 0);
    EXPECT_EQ(w.tokens, (std::vector<std::string>{"new", "york"}));
    EXPECT_EQ(w.target_span, (TokenSpan{0, 1}));
}

TEST(Window, LargeKClampsToSentence) {
    ContextOccurrence o;
    for (int i = 0; i < 10; ++i) {
        o.tokens.push_back("t" + std::to_string(i));
    }
    o.word = "t0";
    o.target_span = {0, 0};
    EXPECT_EQ(window_context(o, 32), o);
}

TEST(Window, PropertyNestedWindowsAreContiguousSubspans) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        ContextOccurrence o;
        const auto n = 1 + uniform_below(rng, 40);
        for (std::uint64_t i = 0; i < n; ++i) {
            o.tokens.push_back("t" + std::to_string(i));
        }
        o.target_span.first = uniform_below(rng, n);
        o.target_span.last = o.target_span.first + uniform_below(rng, std::min<std::uint64_t>(3, n - o.target_span.first));
        const auto k1 = uniform_below(rng, 10);
        const auto k2 = k1 + uniform_below(rng, 10);
        const auto a = window_context(o, k1);
        const auto b = window_context(o, k2);
        auto it = std::search(b.tokens.begin(), b.tokens.end(), a.tokens.begin(), a.tokens.end());
        ASSERT_NE(it, b.tokens.end());
        const auto offset = static_cast<std::size_t>(it - b.tokens.begin());
        EXPECT_EQ(offset + a.target_span.first, b.target_span.first);
        EXPECT_EQ(span_text(a.tokens, a.target_span), span_text(o.tokens, o.target_span));
    }
}

TEST(Jsonl, OccurrenceRoundTrip) {
    const auto inv = small_inventory();
    ContextOccurrence o;
    o.occurrence_id = 42;
    o.word = "new york";
    o.sclass = 1;
    o.tokens = {"in", "new", "york", "\"quoted\""};
    o.target_span = {1, 2};
    o.split = Split::dev;
    const auto line = occurrence_to_json(o);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(occurrence_from_json(line, inv), o);
}

TEST(Jsonl, ClassMayBeGivenByName) {
    const auto inv = small_inventory();
    const auto o = occurrence_from_json(
        R"({"occurrence_id":1,"word":"paris","sclass":"location","tokens":["paris"],"target_span":[0,0],"split":"test"})",
        inv);
    EXPECT_EQ(o.sclass, 0);
    EXPECT_EQ(o.split, Split::test);
}

TEST(Jsonl, MalformedLineNamesLineNumber) {
    const auto inv = small_inventory();
    std::istringstream in(occurrence_to_json(make_occ(0, "paris", 0)) + "\n\n{not json\n");
    try {
        read_occurrences_jsonl(in, inv);
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse_error);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Jsonl, DatasetDirectoryRoundTrip) {
    TempDir tmp;
    const auto in = random_input(8, 20, 6);
    const auto ds = make_splits(in.inventory, in.combinations, in.occurrences, {0.2, 1});
    save_dataset(ds, tmp.path());
    const auto back = load_dataset(tmp.path());
    EXPECT_EQ(back.all_combinations(), ds.all_combinations());
    EXPECT_EQ(back.all_occurrences(), ds.all_occurrences());
    EXPECT_EQ(back.inventory().classes(), ds.inventory().classes());

    // byte-identical re-save
    TempDir again;
    save_dataset(back, again.path());
    for (const char* f : {"inventory.tsv", "occurrences.jsonl", "combinations.jsonl"}) {
        EXPECT_EQ(scprobe::testing::slurp(tmp / f), scprobe::testing::slurp(again / f)) << f;
    }
}
