// ingest, sample, split, synth
#include <fstream>
#include <memory>
#include <sstream>

#include "run.hpp"
#include "scprobe/baselines.hpp"
#include "scprobe/corpus.hpp"
#include "scprobe/error.hpp"
#include "scprobe/synthetic.hpp"

namespace scprobe::cli {

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::missing_input, "cannot open " + path.string());
    }
    return in;
}

char single_char(const std::string& s, const char* what) {
    if (s.size() != 1) {
        fail(ErrorCode::invalid_argument, std::string(what) + " must be a single character");
    }
    return s[0];
}

std::vector<ContextOccurrence> read_occurrences(const fs::path& path, const SClassInventory& inventory) {
    auto in = open_in(path);
    return read_occurrences_jsonl(in, inventory);
}

}  // namespace

void register_data_commands(CLI::App& app) {
    add_command(app, "ingest", "Parse an @word@-annotated corpus against an s-class inventory", [](CLI::App& cmd) {
        struct Opts {
            fs::path corpus, inventory;
            std::string marker = "@", label_sep = "/", joiner = "_", default_split = "train";
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--corpus", o->corpus, "annotated corpus, one `[split<TAB>]tokens` line per sentence")
            ->required();
        cmd.add_option("--inventory", o->inventory, "s-class inventory TSV")->required();
        cmd.add_option("--marker", o->marker, "target marker character")->capture_default_str();
        cmd.add_option("--label-sep", o->label_sep, "separator before an explicit class label")
            ->capture_default_str();
        cmd.add_option("--joiner", o->joiner, "phrase member joiner inside a marker")->capture_default_str();
        cmd.add_option("--default-split", o->default_split, "split for lines without a split column")
            ->capture_default_str();
        return [o](Run& run) {
            run.input("corpus", o->corpus);
            run.input("inventory", o->inventory);
            MarkerConvention conv;
            conv.marker = single_char(o->marker, "--marker");
            conv.label_separator = single_char(o->label_sep, "--label-sep");
            conv.phrase_joiner = single_char(o->joiner, "--joiner");
            conv.default_split = parse_split(o->default_split);
            const auto inventory = read_inventory(o->inventory);
            auto in = open_in(o->corpus);
            const auto parsed = parse_annotated_corpus(in, inventory, conv);

            std::ostringstream occ, rej, inv;
            write_occurrences_jsonl(occ, parsed.occurrences);
            write_rejects_jsonl(rej, parsed.rejects);
            write_inventory(inv, inventory);
            run.write_text("occurrences.jsonl", occ.str());
            run.write_text("rejects.jsonl", rej.str());
            run.write_text("inventory.tsv", inv.str());
            run.write_json("summary.json", {{"lines_read", parsed.lines_read},
                                            {"lines_skipped", parsed.lines_skipped},
                                            {"occurrences", parsed.occurrences.size()},
                                            {"rejects", parsed.rejects.size()}});
        };
    });

    add_command(app, "sample", "Group occurrences into word-class combinations, capping contexts per group",
                [](CLI::App& cmd) {
                    struct Opts {
                        fs::path occurrences, inventory;
                        std::size_t max_contexts = default_max_contexts;
                        std::uint64_t seed = 0;
                    };
                    auto o = std::make_shared<Opts>();
                    cmd.add_option("--occurrences", o->occurrences, "occurrences.jsonl")->required();
                    cmd.add_option("--inventory", o->inventory, "s-class inventory TSV")->required();
                    cmd.add_option("--max-contexts", o->max_contexts, "contexts kept per combination")
                        ->capture_default_str();
                    cmd.add_option("--seed", o->seed, "subsampling seed")->capture_default_str();
                    return [o](Run& run) {
                        run.input("occurrences", o->occurrences);
                        run.input("inventory", o->inventory);
                        run.seed("sample", o->seed);
                        const auto inventory = read_inventory(o->inventory);
                        const auto occs = read_occurrences(o->occurrences, inventory);
                        const auto combos = sample_combinations(occs, o->max_contexts, o->seed);
                        std::size_t kept = 0;
                        for (const auto& c : combos) {
                            kept += c.occurrence_ids.size();
                        }
                        std::ostringstream out;
                        write_combinations_jsonl(out, combos);
                        run.write_text("combinations.jsonl", out.str());
                        run.write_json("summary.json", {{"combinations", combos.size()},
                                                        {"occurrences_in", occs.size()},
                                                        {"occurrences_kept", kept}});
                    };
                });

    add_command(app, "split", "Carve a word-disjoint dev split out of train and write a dataset directory",
                [](CLI::App& cmd) {
                    struct Opts {
                        fs::path occurrences, combinations, inventory;
                        double dev_fraction = 0.2;
                        std::uint64_t seed = 0;
                        std::string granularity = "word";
                    };
                    auto o = std::make_shared<Opts>();
                    cmd.add_option("--occurrences", o->occurrences, "occurrences.jsonl")->required();
                    cmd.add_option("--combinations", o->combinations, "combinations.jsonl")->required();
                    cmd.add_option("--inventory", o->inventory, "s-class inventory TSV")->required();
                    cmd.add_option("--dev-fraction", o->dev_fraction, "share of train units moved to dev")
                        ->capture_default_str();
                    cmd.add_option("--seed", o->seed, "split seed")->capture_default_str();
                    cmd.add_option("--granularity", o->granularity, "word | combination")
                        ->check(CLI::IsMember({"word", "combination"}))
                        ->capture_default_str();
                    return [o](Run& run) {
                        run.input("occurrences", o->occurrences);
                        run.input("combinations", o->combinations);
                        run.input("inventory", o->inventory);
                        run.seed("split", o->seed);
                        const auto inventory = read_inventory(o->inventory);
                        const auto occs = read_occurrences(o->occurrences, inventory);
                        auto in = open_in(o->combinations);
                        const auto combos = read_combinations_jsonl(in, inventory);
                        SplitOptions opts{o->dev_fraction, o->seed,
                                          o->granularity == "word" ? SplitGranularity::word
                                                                   : SplitGranularity::combination};
                        const auto ds = make_splits(inventory, combos, occs, opts);
                        save_dataset(ds, run.dir("dataset"));
                        nlohmann::json counts;
                        for (auto s : {Split::train, Split::dev, Split::test}) {
                            counts[std::string(split_name(s))] = {{"combinations", ds.combinations(s).size()},
                                                                  {"occurrences", ds.occurrences(s).size()},
                                                                  {"words", ds.words(s).size()}};
                        }
                        run.write_json("summary.json", counts);
                    };
                });

    add_command(app, "synth", "Write a planted-signal synthetic corpus, inventory, token vectors and a store",
                [](CLI::App& cmd) {
                    struct Opts {
                        SyntheticCorpusConfig corpus;
                        std::string encoder = "cluster";
                        std::vector<double> layer_noise{1.0, 0.5};
                        std::uint64_t encoder_seed = 0;
                        bool no_store = false;
                    };
                    auto o = std::make_shared<Opts>();
                    auto& c = o->corpus;
                    cmd.add_option("--classes", c.n_classes, "number of s-classes")->capture_default_str();
                    cmd.add_option("--words", c.n_words, "number of target words")->capture_default_str();
                    cmd.add_option("--dim", c.dim, "embedding width")->capture_default_str();
                    cmd.add_option("--min-contexts", c.min_contexts, "contexts per combination, lower bound")
                        ->capture_default_str();
                    cmd.add_option("--max-contexts", c.max_contexts, "contexts per combination, upper bound")
                        ->capture_default_str();
                    cmd.add_option("--max-classes-per-word", c.max_classes_per_word, "upper bound of classes per word")
                        ->capture_default_str();
                    cmd.add_option("--cue-radius", c.cue_radius, "class cues on each side of the target")
                        ->capture_default_str();
                    cmd.add_option("--test-fraction", c.test_word_fraction, "share of words in test")
                        ->capture_default_str();
                    cmd.add_flag("--shuffle-labels", c.shuffle_labels, "permute class labels across sentences");
                    cmd.add_option("--seed", c.seed, "corpus seed")->capture_default_str();
                    cmd.add_option("--encoder", o->encoder, "cluster | toy")
                        ->check(CLI::IsMember({"cluster", "toy"}))
                        ->capture_default_str();
                    cmd.add_option("--layer-noise", o->layer_noise, "noise sigma per store layer L0, L1, ...")
                        ->delimiter(',')
                        ->capture_default_str();
                    cmd.add_option("--encoder-seed", o->encoder_seed, "store noise seed")->capture_default_str();
                    cmd.add_flag("--no-store", o->no_store, "skip writing the embedding store");
                    return [o](Run& run) {
                        run.seed("corpus", o->corpus.seed);
                        run.seed("encoder", o->encoder_seed);
                        const auto corpus = make_synthetic_corpus(o->corpus);
                        std::ostringstream lines, inv, vecs;
                        for (const auto& occ : corpus.occurrences) {
                            lines << to_marker_line(occ, corpus.inventory) << '\n';
                        }
                        write_inventory(inv, corpus.inventory);
                        write_vectors(vecs, corpus.token_embeddings);
                        run.write_text("corpus.txt", lines.str());
                        run.write_text("inventory.tsv", inv.str());
                        run.write_text("token_vectors.txt", vecs.str());
                        if (!o->no_store) {
                            std::vector<std::string> tags;
                            for (std::size_t l = 0; l < o->layer_noise.size(); ++l) {
                                tags.push_back("L" + std::to_string(l));
                            }
                            const auto dir = run.dir("store");
                            if (o->encoder == "cluster") {
                                ClusterEncoder enc;
                                enc.dim = o->corpus.dim;
                                enc.n_classes = o->corpus.n_classes;
                                enc.layer_tags = tags;
                                enc.layer_sigma = o->layer_noise;
                                enc.latent_class = corpus.latent_class;
                                enc.seed = o->encoder_seed;
                                enc.write_store(dir, "synthetic", "synthetic-cluster", corpus.occurrences);
                            } else {
                                ToyEncoder enc{&corpus.token_embeddings, tags, o->layer_noise, o->encoder_seed};
                                enc.write_store(dir, "synthetic", "synthetic-toy", corpus.occurrences);
                            }
                        }
                        run.write_json("summary.json", {{"classes", corpus.inventory.size()},
                                                        {"words", corpus.inventory.word_to_classes().size()},
                                                        {"occurrences", corpus.occurrences.size()}});
                    };
                });
}

}  // namespace scprobe::cli
