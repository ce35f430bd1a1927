#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "scprobe/eval.hpp"
#include "scprobe/random.hpp"
#include "test_support.hpp"

using namespace scprobe;
using scprobe::testing::TempDir;

namespace {

// Probe for class c over n_classes-dim inputs that fires iff x[c] > 0.5.
ProbeModel indicator_probe(int c, std::size_t n_classes) {
    ProbeModel p;
    p.class_index = c;
    p.params = MlpParameters<float>::zeros(n_classes, 1);
    p.params.w1(c, 0) = 1.0f;
    p.params.b1(0) = -0.5f;
    p.params.w2(0, 1) = 1.0f;
    return p;
}

std::vector<ProbeModel> indicator_suite(std::size_t n_classes) {
    std::vector<ProbeModel> out;
    for (std::size_t c = 0; c < n_classes; ++c) {
        out.push_back(indicator_probe(static_cast<int>(c), n_classes));
    }
    return out;
}

std::vector<ProbeModel> silent_suite(std::size_t n_classes, std::size_t dim) {
    std::vector<ProbeModel> out;
    for (std::size_t c = 0; c < n_classes; ++c) {
        ProbeModel p;
        p.class_index = static_cast<int>(c);
        p.params = MlpParameters<float>::zeros(dim, 1);
        p.params.b2(0) = 1.0f;
        out.push_back(p);
    }
    return out;
}

struct TokenFixture {
    ProbingDataset dataset;
    OccurrenceFeatures features;
};

// combos: (word, class, per-context firing pattern as bitmask over classes)
TokenFixture token_fixture(const SClassInventory& inv,
                           const std::vector<std::tuple<std::string, int, std::vector<std::vector<int>>>>& combos) {
    std::vector<ContextOccurrence> occs;
    std::vector<std::vector<int>> fire;
    std::int64_t id = 0;
    for (const auto& [word, cls, contexts] : combos) {
        for (const auto& firing : contexts) {
            ContextOccurrence o;
            o.occurrence_id = id++;
            o.word = word;
            o.sclass = cls;
            o.tokens = {word};
            o.split = Split::dev;
            occs.push_back(o);
            fire.push_back(firing);
        }
    }
    TokenFixture f{ProbingDataset(inv, sample_combinations(occs, 1000), occs), {}};
    const auto dev = f.dataset.occurrences(Split::dev);
    f.features.vectors = RowMatrix<float>::Zero(static_cast<Eigen::Index>(dev.size()),
                                                static_cast<Eigen::Index>(inv.size()));
    for (std::size_t i = 0; i < dev.size(); ++i) {
        for (int c : fire[static_cast<std::size_t>(dev[i].occurrence_id)]) {
            f.features.vectors(static_cast<Eigen::Index>(i), c) = 1.0f;
        }
        f.features.occurrence_ids.push_back(dev[i].occurrence_id);
        f.features.sclass.push_back(dev[i].sclass);
    }
    return f;
}

SClassInventory inventory3() {
    SClassInventory inv({"art", "food", "location"});
    for (const char* w : {"airheads", "apple", "paris", "w0", "w1", "w2"}) {
        inv.add_word(w, std::vector<int>{0, 1, 2});
    }
    return inv;
}

}  // namespace

TEST(Aggregate, WorkedExamples) {
    EXPECT_TRUE(aggregate_combination(24, 47));
    EXPECT_FALSE(aggregate_combination(23, 47));
    EXPECT_TRUE(aggregate_combination(1, 1));
    EXPECT_FALSE(aggregate_combination(0, 1));
    EXPECT_TRUE(aggregate_combination(1, 2));
    EXPECT_EQ(majority_threshold(47), 24u);
    EXPECT_SCPROBE_ERROR(aggregate_combination(0, 0), ErrorCode::invalid_argument);
    EXPECT_SCPROBE_ERROR(aggregate_combination(std::span<const std::uint8_t>{}), ErrorCode::invalid_argument);
}

TEST(Aggregate, BooleanListMatchesCount) {
    std::vector<std::uint8_t> v(47, 0);
    std::fill_n(v.begin(), 24, 1);
    EXPECT_TRUE(aggregate_combination(v));
    v[0] = 0;
    EXPECT_FALSE(aggregate_combination(v));
}

TEST(Aggregate, PropertyMonotoneInCorrectContexts) {
    for (std::size_t n = 1; n <= 200; ++n) {
        bool previous = false;
        for (std::size_t c = 0; c <= n; ++c) {
            const bool now = aggregate_combination(c, n);
            EXPECT_FALSE(previous && !now) << "n=" << n << " c=" << c;
            EXPECT_EQ(now, 2 * c >= n) << "n=" << n << " c=" << c;
            previous = now;
        }
    }
}

TEST(MicroF1, AllCorrectIsOne) {
    const std::vector<Decision> d{{"u", 0, true, true}, {"u", 1, false, false}, {"v", 0, false, false},
                                  {"v", 1, true, true}};
    const auto s = micro_f1(d);
    EXPECT_DOUBLE_EQ(s.f1, 1.0);
    EXPECT_DOUBLE_EQ(s.accuracy(), 1.0);
}

TEST(MicroF1, TwoOneOne) {
    const std::vector<Decision> d{{"a", 0, true, true},   {"b", 0, true, true},  {"c", 0, false, true},
                                  {"d", 0, true, false},  {"e", 0, false, false}};
    const auto s = micro_f1(d);
    EXPECT_EQ(s.tp, 2u);
    EXPECT_EQ(s.fp, 1u);
    EXPECT_EQ(s.fn, 1u);
    EXPECT_EQ(s.tn, 1u);
    EXPECT_NEAR(s.precision, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.recall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.f1, 2.0 / 3.0, 1e-15);
}

TEST(MicroF1, DegenerateConventions) {
    const std::vector<Decision> none_predicted{{"a", 0, true, false}, {"b", 0, false, false}};
    const auto s = micro_f1(none_predicted);
    EXPECT_EQ(s.precision, 0.0);
    EXPECT_EQ(s.recall, 0.0);
    EXPECT_EQ(s.f1, 0.0);
    const std::vector<Decision> no_gold{{"a", 0, false, true}};
    EXPECT_EQ(micro_f1(no_gold).recall, 0.0);
    EXPECT_EQ(micro_f1(no_gold).f1, 0.0);
    EXPECT_EQ(micro_f1({}).f1, 0.0);
}

TEST(MicroF1, PropertyPermutationInvariantAndPerfectIffExact) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Decision> d(1 + uniform_below(rng, 60));
        for (auto& x : d) {
            x.gold = uniform_below(rng, 2);
            x.predicted = uniform_below(rng, 2);
        }
        const auto a = micro_f1(d);
        shuffle(std::span(d), rng);
        const auto b = micro_f1(d);
        EXPECT_EQ(a.f1, b.f1);
        EXPECT_GE(a.f1, 0.0);
        EXPECT_LE(a.f1, 1.0);
        const bool exact = std::all_of(d.begin(), d.end(), [](const auto& x) { return x.gold == x.predicted; });
        const bool any_gold = std::any_of(d.begin(), d.end(), [](const auto& x) { return x.gold; });
        if (any_gold) {
            EXPECT_EQ(a.f1 == 1.0, exact);
        }
    }
}

TEST(TypeLevel, PerfectProbesOneWordThreeClasses) {
    SClassInventory inv({"a", "b", "c"});
    inv.add_word("w", std::vector<int>{1});
    TypeLevelSpace space("s", 3);
    space.set("w", std::vector<float>{0, 1, 0});
    const std::vector<std::string> words{"w"};
    const auto r = eval_type_level(space, indicator_suite(3), words, inv, {"glove", "-", "full"});
    EXPECT_EQ(r.decision_count(), 3u);
    EXPECT_DOUBLE_EQ(r.f1(), 1.0);
    EXPECT_EQ(r.context.setup, Setup::type_level);
}

TEST(TypeLevel, AllNegativeProbesScoreZero) {
    SClassInventory inv({"a", "b"});
    inv.add_word("w", std::vector<int>{0});
    inv.add_word("v", std::vector<int>{1});
    TypeLevelSpace space("s", 2);
    const std::vector<std::string> words{"w", "v"};
    const auto r = eval_type_level(space, silent_suite(2, 2), words, inv, {"rand", "-", "full"});
    EXPECT_EQ(r.f1(), 0.0);
    EXPECT_EQ(r.micro.fn, 2u);
}

TEST(TypeLevel, SixWordsMatchIndependentRecomputation) {
    SClassInventory inv({"a", "b", "c"});
    const std::vector<std::pair<std::string, std::vector<int>>> rows{
        {"w0", {0}}, {"w1", {1}}, {"w2", {2}}, {"w3", {0, 1}}, {"w4", {1, 2}}, {"w5", {0, 2}}};
    TypeLevelSpace space("s", 3);
    Rng rng(41);
    for (const auto& [w, cls] : rows) {
        inv.add_word(w, cls);
        std::vector<float> v(3);
        for (auto& x : v) {
            x = static_cast<float>(uniform_unit(rng));  // planted but imperfect structure
        }
        for (int c : cls) {
            v[static_cast<std::size_t>(c)] += 0.3f;
        }
        space.set(w, v);
    }
    std::vector<std::string> words;
    for (const auto& r : rows) {
        words.push_back(r.first);
    }
    words.push_back("oov-word");
    const auto probes = indicator_suite(3);
    const auto report = eval_type_level(space, probes, words, inv, {"s", "-", "full"}, 5);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& w : words) {
        const auto v = space.contains(w) ? std::vector<float>(space.at(w).begin(), space.at(w).end())
                                         : random_vector(w, 3, 5);
        for (int c = 0; c < 3; ++c) {
            const bool pred = v[static_cast<std::size_t>(c)] > 0.5f;
            const bool gold = inv.has_class(w, c);
            tp += pred && gold;
            fp += pred && !gold;
            fn += !pred && gold;
        }
    }
    EXPECT_EQ(report.micro.tp, tp);
    EXPECT_EQ(report.micro.fp, fp);
    EXPECT_EQ(report.micro.fn, fn);
    EXPECT_EQ(report.decision_count(), 21u);
}

TEST(TypeLevel, MissingProbeIsError) {
    SClassInventory inv({"a", "b"});
    TypeLevelSpace space("s", 2);
    const std::vector<std::string> words{"x"};
    auto probes = indicator_suite(2);
    EXPECT_SCPROBE_ERROR(eval_type_level(space, std::span(probes).first(1), words, inv, {}),
                         ErrorCode::missing_probe);
    probes[1].class_index = 0;
    EXPECT_SCPROBE_ERROR(eval_type_level(space, probes, words, inv, {}), ErrorCode::missing_probe);
}

TEST(TokenLevel, AirheadsFortySevenContexts) {
    const auto inv = inventory3();
    std::vector<std::vector<int>> contexts(47);
    for (std::size_t i = 0; i < 47; ++i) {
        if (i < 24) {
            contexts[i].push_back(0);  // art fires on 24
        }
        if (i >= 24) {
            contexts[i].push_back(1);  // food fires on the other 23
        }
        if (i % 3 == 0) {
            contexts[i].push_back(2);  // location on 16
        }
    }
    const auto f = token_fixture(inv, {{"airheads", 0, contexts}});
    const auto r = eval_token_level(f.dataset, Split::dev, f.features, indicator_suite(3), {"enc", "L11", "full"});
    ASSERT_EQ(r.decisions.size(), 3u);
    EXPECT_EQ(r.decisions[0].unit, "@airheads@-art");
    EXPECT_TRUE(r.decisions[0].gold && r.decisions[0].predicted);
    EXPECT_FALSE(r.decisions[1].predicted);
    EXPECT_FALSE(r.decisions[2].predicted);
    EXPECT_DOUBLE_EQ(r.f1(), 1.0);
}

TEST(TokenLevel, SilentProbesScoreZero) {
    const auto inv = inventory3();
    const auto f = token_fixture(inv, {{"apple", 1, {{}, {}}}, {"paris", 2, {{}}}});
    const auto r = eval_token_level(f.dataset, Split::dev, f.features, silent_suite(3, 3), {"e", "L0", "full"});
    EXPECT_EQ(r.micro.recall, 0.0);
    EXPECT_EQ(r.f1(), 0.0);
    EXPECT_EQ(r.decision_count(), 6u);
}

TEST(TokenLevel, ThreeByThreeHandPooled) {
    const auto inv = inventory3();
    // w0/art: 3 contexts; art fires on 2, food on 2, location on 1
    //   -> art TP, food FP, location TN
    // w1/food: 2 contexts; art fires on 0, food on 1, location on 2
    //   -> art TN, food TP (1 >= 1), location FP
    // w2/location: 1 context; nothing fires -> location FN
    const auto f = token_fixture(inv, {{"w0", 0, {{0, 1}, {0, 2}, {1}}},
                                       {"w1", 1, {{1, 2}, {2}}},
                                       {"w2", 2, {{}}}});
    const auto r = eval_token_level(f.dataset, Split::dev, f.features, indicator_suite(3), {"e", "L0", "full"});
    EXPECT_EQ(r.micro.tp, 2u);
    EXPECT_EQ(r.micro.fp, 2u);
    EXPECT_EQ(r.micro.fn, 1u);
    EXPECT_EQ(r.micro.tn, 4u);
    EXPECT_NEAR(r.micro.precision, 0.5, 1e-15);
    EXPECT_NEAR(r.micro.recall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.f1(), 2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0), 1e-15);
    EXPECT_EQ(r.decision_count(), r.units * 3);
    // per class: art TP only; food TP+FP; location FP+FN
    EXPECT_DOUBLE_EQ(r.per_class[0].f1, 1.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.5);
    EXPECT_DOUBLE_EQ(r.per_class[2].f1, 0.0);

    const auto own = eval_token_level(f.dataset, Split::dev, f.features, indicator_suite(3), {"e", "L0", "full"},
                                      DecisionMode::own_class_only);
    EXPECT_EQ(own.decision_count(), 3u);
    EXPECT_NEAR(own.micro.accuracy(), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(own.decision_mode, DecisionMode::own_class_only);
}

TEST(TokenLevel, MissingProbeAndMissingRow) {
    const auto inv = inventory3();
    auto f = token_fixture(inv, {{"w0", 0, {{0}}}});
    const auto probes = indicator_suite(3);
    EXPECT_SCPROBE_ERROR(eval_token_level(f.dataset, Split::dev, f.features, std::span(probes).first(2), {}),
                         ErrorCode::missing_probe);
    f.features.occurrence_ids[0] = 999;
    EXPECT_SCPROBE_ERROR(eval_token_level(f.dataset, Split::dev, f.features, probes, {}), ErrorCode::missing_row);
}

TEST(Report, JsonRoundTripAndCsvRows) {
    const auto inv = inventory3();
    const auto f = token_fixture(inv, {{"w0", 0, {{0, 1}, {0, 2}, {1}}}, {"w1", 1, {{1, 2}, {2}}}});
    const auto r = eval_token_level(f.dataset, Split::dev, f.features, indicator_suite(3),
                                    {"bert@pretrained", "L3", "8", Setup::pretrained});
    const auto back = report_from_json(report_to_json(r, true));
    EXPECT_EQ(back.context.encoder_id, "bert@pretrained");
    EXPECT_EQ(back.context.context_size, "8");
    EXPECT_EQ(back.micro.tp, r.micro.tp);
    EXPECT_DOUBLE_EQ(back.f1(), r.f1());
    EXPECT_EQ(back.decisions.size(), r.decisions.size());
    EXPECT_EQ(back.class_names, inv.classes());

    std::ostringstream csv;
    const std::vector<EvalReport> reports{r, back};
    write_report_csv(csv, reports);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "encoder_id,layer,context_size,setup,class,precision,recall,f1,decisions");
    std::size_t rows = 0;
    std::getline(lines, line);
    EXPECT_EQ(line.rfind("bert@pretrained,L3,8,pretrained,ALL,", 0), 0u) << line;
    ++rows;
    while (std::getline(lines, line)) {
        ++rows;
    }
    EXPECT_EQ(rows, 2u * (1 + inv.size()));

    const auto many = reports_from_json(reports_to_json(reports));
    EXPECT_EQ(many.size(), 2u);
    EXPECT_SCPROBE_ERROR(report_from_json("{}"), ErrorCode::parse_error);
}

TEST(Names, SetupAndModeRoundTrip) {
    for (auto s : {Setup::pretrained, Setup::finetuned_a, Setup::finetuned_b, Setup::type_level}) {
        EXPECT_EQ(parse_setup(setup_name(s)), s);
    }
    for (auto m : {DecisionMode::per_combination_per_class, DecisionMode::own_class_only}) {
        EXPECT_EQ(parse_decision_mode(decision_mode_name(m)), m);
    }
    EXPECT_SCPROBE_ERROR(parse_setup("finetuned"), ErrorCode::invalid_argument);
}
