// train-probes, eval, sweep-layers, sweep-context, compare-finetuned
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "run.hpp"
#include "scprobe/baselines.hpp"
#include "scprobe/error.hpp"
#include "scprobe/eval.hpp"
#include "scprobe/random.hpp"
#include "scprobe/wordpiece.hpp"

namespace scprobe::cli {

namespace {

struct TrainOpts {
    std::size_t hidden = default_hidden;
    std::size_t epochs = 400;
    std::size_t batch_size = 256;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string train_split = "train";
    std::string eval_split = "test";
    std::string mode = "per-combination-per-class";
};

void add_train_options(CLI::App& cmd, TrainOpts& t, bool with_eval) {
    cmd.add_option("--hidden", t.hidden, "probe hidden width")->capture_default_str();
    cmd.add_option("--epochs", t.epochs, "training epochs")->capture_default_str();
    cmd.add_option("--batch-size", t.batch_size, "mini-batch size")->capture_default_str();
    cmd.add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
    cmd.add_option("--seed", t.seed, "probe init/shuffle seed")->capture_default_str();
    cmd.add_option("--train-split", t.train_split, "split the probes are trained on")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->capture_default_str();
    if (with_eval) {
        cmd.add_option("--eval-split", t.eval_split, "split the probes are scored on")
            ->check(CLI::IsMember({"train", "dev", "test"}))
            ->capture_default_str();
        cmd.add_option("--mode", t.mode, "per-combination-per-class | own-class-only")
            ->check(CLI::IsMember({"per-combination-per-class", "own-class-only"}))
            ->capture_default_str();
    }
}

TrainConfig train_config(const TrainOpts& t) {
    TrainConfig c;
    c.hidden = t.hidden;
    c.epochs = t.epochs;
    c.batch_size = t.batch_size;
    c.learning_rate = t.lr;
    c.init_seed = t.seed;
    c.shuffle_seed = derive_seed(t.seed, "shuffle");
    return c;
}

ExperimentOptions experiment(const TrainOpts& t, std::size_t jobs) {
    ExperimentOptions o;
    o.train = train_config(t);
    o.train_split = parse_split(t.train_split);
    o.eval_split = parse_split(t.eval_split);
    o.mode = parse_decision_mode(t.mode);
    o.jobs = jobs;
    return o;
}

void record_seeds(Run& run, const TrainOpts& t) {
    const auto c = train_config(t);
    run.seed("probe_init", c.init_seed);
    run.seed("probe_shuffle", c.shuffle_seed);
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// A train-probes run directory, or the probes directory inside one.
fs::path probe_dir(const fs::path& p) { return fs::is_directory(p / "probes") ? p / "probes" : p; }

std::vector<int> resolve_classes(const std::vector<std::string>& requested, const SClassInventory& inventory) {
    const auto names = split_list(requested);
    std::vector<int> out;
    if (names.empty() || (names.size() == 1 && names[0] == "all")) {
        for (std::size_t c = 0; c < inventory.size(); ++c) {
            out.push_back(static_cast<int>(c));
        }
        return out;
    }
    for (const auto& n : names) {
        out.push_back(inventory.index_of(n));
    }
    return out;
}

/// Where type-level vectors come from: a text vector file, a random space, or
/// an anchor space averaged over a store layer.
struct TypeSource {
    fs::path vectors, anchor_store;
    std::string anchor_layer;
    std::size_t random_dim = 0;
    std::uint64_t oov_seed = 0;

    bool active() const { return !vectors.empty() || random_dim > 0 || !anchor_store.empty(); }

    void add(CLI::App& cmd) {
        cmd.add_option("--vectors", vectors, "type-level: word vector text file (GloVe/fastText format)");
        cmd.add_option("--random-dim", random_dim, "type-level: random N(0, I) vectors of this width");
        cmd.add_option("--anchor-store", anchor_store, "type-level: average each word's rows of this store");
        cmd.add_option("--anchor-layer", anchor_layer, "type-level: layer used with --anchor-store");
        cmd.add_option("--oov-seed", oov_seed, "seed for random vectors of OOV words")->capture_default_str();
    }

    void record_inputs(Run& run) const {
        if (!vectors.empty()) {
            run.input("vectors", vectors);
        }
        if (!anchor_store.empty()) {
            if (anchor_layer.empty()) {
                fail(ErrorCode::invalid_argument, "--anchor-layer is required with --anchor-store");
            }
            run.input("anchor store", anchor_store);
        }
    }

    TypeLevelSpace load(Run& run, const ProbingDataset& ds) const {
        run.seed("oov", oov_seed);
        if (!vectors.empty()) {
            return load_vectors(vectors);
        }
        if (!anchor_store.empty()) {
            return build_anchor_space(EmbeddingStore::open(anchor_store), anchor_layer);
        }
        std::vector<std::string> vocab;
        for (const auto& [w, _] : ds.inventory().word_to_classes()) {
            vocab.push_back(w);
        }
        return random_space(vocab, random_dim, oov_seed);
    }
};

void write_reports(Run& run, const std::string& csv_name, const std::vector<EvalReport>& reports) {
    run.write_text("reports.json", reports_to_json(reports) + "\n");
    std::ostringstream csv;
    write_report_csv(csv, reports);
    run.write_text(csv_name, csv.str());
}

std::map<std::string, fs::path> parse_keyed(const std::vector<std::string>& items, const char* flag) {
    std::map<std::string, fs::path> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            fail(ErrorCode::invalid_argument, std::string(flag) + " expects KEY=VALUE, got '" + item + "'");
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

}  // namespace

void register_probe_commands(CLI::App& app) {
    add_command(app, "train-probes", "Train one binary MLP probe per s-class", [](CLI::App& cmd) {
        struct Opts {
            fs::path dataset, store;
            std::string layer;
            std::vector<std::string> classes{"all"};
            TrainOpts train;
            TypeSource type;
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--dataset", o->dataset, "dataset directory written by `split`")->required();
        cmd.add_option("--store", o->store, "token-level: embedding store directory");
        cmd.add_option("--layer", o->layer, "token-level: layer tag, e.g. L11");
        cmd.add_option("--classes", o->classes, "`all` or class names (comma separated)")
            ->delimiter(',')
            ->capture_default_str();
        add_train_options(cmd, o->train, false);
        o->type.add(cmd);
        return [o](Run& run) {
            const bool type_level = o->type.active();
            if (type_level == !o->store.empty()) {
                fail(ErrorCode::invalid_argument, "give either --store/--layer or one of --vectors, --random-dim, --anchor-store");
            }
            run.input("dataset", o->dataset);
            if (!type_level) {
                if (o->layer.empty()) {
                    fail(ErrorCode::invalid_argument, "--layer is required with --store");
                }
                run.input("store", o->store);
            } else {
                o->type.record_inputs(run);
            }
            record_seeds(run, o->train);
            const auto ds = load_dataset(o->dataset);
            const auto& inv = ds.inventory();
            const auto classes = resolve_classes(o->classes, inv);
            const auto config = train_config(o->train);
            const auto split = parse_split(o->train.train_split);

            std::vector<std::vector<EpochLog>> logs;
            std::vector<ProbeModel> probes;
            nlohmann::json meta;
            if (type_level) {
                const auto space = o->type.load(run, ds);
                const auto words = ds.words(split);
                probes = train_probe_suite(
                    classes,
                    [&](int c) { return build_type_level_set(space, inv, c, words, o->type.oov_seed); }, config,
                    run.jobs(), &logs);
                meta = {{"kind", "type-level"}, {"space", space.name()}, {"dim", space.dim()}};
            } else {
                const auto store = EmbeddingStore::open(o->store);
                const auto features = token_level_features(ds, store, o->layer, split);
                if (features.size() == 0) {
                    fail(ErrorCode::invalid_argument, "no occurrences in split '" + o->train.train_split + "'");
                }
                probes = train_probe_suite(
                    classes, [&](int c) { return label_for_class(features, c); }, config, run.jobs(), &logs);
                meta = {{"kind", "token-level"},
                        {"encoder_id", store.manifest().encoder_id},
                        {"layer", o->layer},
                        {"context_size", store.manifest().context_size_label()},
                        {"dim", store.dim()}};
            }
            save_probe_suite(run.dir("probes"), probes);
            std::string log = "class,class_name,epoch,mean_loss\n";
            nlohmann::json names = nlohmann::json::array();
            for (std::size_t i = 0; i < classes.size(); ++i) {
                names.push_back(inv.name(classes[i]));
                for (const auto& e : logs[i]) {
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "%.9g", e.mean_loss);
                    log += std::to_string(classes[i]) + "," + inv.name(classes[i]) + "," + std::to_string(e.epoch) +
                           "," + buf + "\n";
                }
            }
            run.write_text("train_log.csv", log);
            meta["classes"] = names;
            meta["hidden"] = config.hidden;
            meta["epochs"] = config.epochs;
            meta["train_split"] = o->train.train_split;
            run.write_json("probes.json", meta);
        };
    });

    add_command(app, "eval", "Score a probe suite on a split (micro-F1 over all decisions)", [](CLI::App& cmd) {
        struct Opts {
            fs::path dataset, store, probes;
            std::string layer, split = "test", mode = "per-combination-per-class", setup = "pretrained";
            TypeSource type;
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--dataset", o->dataset, "dataset directory")->required();
        cmd.add_option("--probes", o->probes, "train-probes run directory (or its probes/ directory)")->required();
        cmd.add_option("--store", o->store, "token-level: embedding store directory");
        cmd.add_option("--layer", o->layer, "token-level: layer tag");
        cmd.add_option("--split", o->split, "split to score")
            ->check(CLI::IsMember({"train", "dev", "test"}))
            ->capture_default_str();
        cmd.add_option("--mode", o->mode, "per-combination-per-class | own-class-only")
            ->check(CLI::IsMember({"per-combination-per-class", "own-class-only"}))
            ->capture_default_str();
        cmd.add_option("--setup", o->setup, "label for the report: pretrained | finetuned-a | finetuned-b")
            ->capture_default_str();
        o->type.add(cmd);
        return [o](Run& run) {
            const bool type_level = o->type.active();
            if (type_level == !o->store.empty()) {
                fail(ErrorCode::invalid_argument, "give either --store/--layer or one of --vectors, --random-dim, --anchor-store");
            }
            run.input("dataset", o->dataset);
            run.input("probes", o->probes);
            if (!type_level) {
                run.input("store", o->store);
            } else {
                o->type.record_inputs(run);
            }
            const auto ds = load_dataset(o->dataset);
            const auto probes = load_probe_suite(probe_dir(o->probes), ds.inventory().size());
            const auto split = parse_split(o->split);
            EvalReport report;
            if (type_level) {
                const auto space = o->type.load(run, ds);
                const auto words = ds.words(split);
                report = eval_type_level(space, probes, words, ds.inventory(), {space.name(), "-", "full"},
                                         o->type.oov_seed, split);
            } else {
                if (o->layer.empty()) {
                    fail(ErrorCode::invalid_argument, "--layer is required with --store");
                }
                const auto store = EmbeddingStore::open(o->store);
                report = eval_token_level(ds, split, store, o->layer, probes, parse_decision_mode(o->mode),
                                          parse_setup(o->setup));
            }
            run.write_text("report.json", report_to_json(report, true) + "\n");
            std::ostringstream csv;
            write_report_csv(csv, std::vector<EvalReport>{report});
            run.write_text("report.csv", csv.str());
        };
    });

    add_command(app, "sweep-layers", "Train and score probes for every layer of a store", [](CLI::App& cmd) {
        struct Opts {
            fs::path dataset, store, probes;
            std::vector<std::string> layers;
            bool save_probes = false;
            TrainOpts train;
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--dataset", o->dataset, "dataset directory")->required();
        cmd.add_option("--store", o->store, "embedding store directory")->required();
        cmd.add_option("--layers", o->layers, "layer tags (default: every layer of the store)")->delimiter(',');
        cmd.add_option("--probes", o->probes, "score existing per-layer suites (<dir>/<layer>/) instead of training");
        cmd.add_flag("--save-probes", o->save_probes, "keep the trained suites under probes/<layer>/");
        add_train_options(cmd, o->train, true);
        return [o](Run& run) {
            run.input("dataset", o->dataset);
            run.input("store", o->store);
            if (!o->probes.empty()) {
                run.input("probes", o->probes);
            }
            record_seeds(run, o->train);
            const auto ds = load_dataset(o->dataset);
            const auto store = EmbeddingStore::open(o->store);
            const auto options = experiment(o->train, run.jobs());
            std::vector<EvalReport> reports;
            if (!o->probes.empty()) {
                std::map<std::string, std::vector<ProbeModel>> suites;
                const auto tags = o->layers.empty() ? store.manifest().layer_tags : o->layers;
                for (const auto& tag : tags) {
                    suites[tag] = load_probe_suite(probe_dir(o->probes) / tag, ds.inventory().size());
                }
                reports = sweep_layers(ds, store, o->layers, suites, options);
            } else {
                std::map<std::string, std::vector<ProbeModel>> trained;
                reports = train_and_sweep_layers(ds, store, o->layers, options, o->save_probes ? &trained : nullptr);
                for (const auto& [tag, suite] : trained) {
                    save_probe_suite(run.dir(fs::path("probes") / tag), suite);
                }
            }
            write_reports(run, "sweep_layers.csv", reports);
            std::string curve = "layer,f1,precision,recall\n";
            for (const auto& r : reports) {
                curve += r.context.layer_tag + "," + fixed(r.f1()) + "," + fixed(r.micro.precision) + "," +
                         fixed(r.micro.recall) + "\n";
            }
            run.write_text("layer_f1.csv", curve);
        };
    });

    add_command(app, "sweep-context", "Score probes across context sizes k, with pooled bag-of-words baselines",
                [](CLI::App& cmd) {
                    struct Opts {
                        fs::path dataset;
                        std::vector<std::string> stores, layers, pooled_vectors, pooled_random, pooled_wordpiece;
                        std::vector<std::size_t> sizes;
                        std::uint64_t oov_seed = 0;
                        TrainOpts train;
                    };
                    auto o = std::make_shared<Opts>();
                    cmd.add_option("--dataset", o->dataset, "dataset directory")->required();
                    cmd.add_option("--store", o->stores, "K=DIR, a store extracted with context size K (repeatable)");
                    cmd.add_option("--layers", o->layers, "layer tags to sweep")->delimiter(',');
                    cmd.add_option("--context-sizes", o->sizes, "k values (default: those given by --store)")
                        ->delimiter(',');
                    cmd.add_option("--pooled-vectors", o->pooled_vectors,
                                   "NAME=FILE, mean-pooled word vectors baseline (repeatable)");
                    cmd.add_option("--pooled-random", o->pooled_random,
                                   "NAME=DIM, mean-pooled random vectors baseline (repeatable)");
                    cmd.add_option("--pooled-wordpiece", o->pooled_wordpiece,
                                   "NAME=TABLE:VOCAB, mean-pooled wordpiece embeddings (repeatable)");
                    cmd.add_option("--oov-seed", o->oov_seed, "seed for random vectors")->capture_default_str();
                    add_train_options(cmd, o->train, true);
                    return [o](Run& run) {
                        run.input("dataset", o->dataset);
                        const auto store_dirs = parse_keyed(o->stores, "--store");
                        for (const auto& [k, dir] : store_dirs) {
                            run.input("store k=" + k, dir);
                        }
                        const auto vec_files = parse_keyed(o->pooled_vectors, "--pooled-vectors");
                        const auto rand_dims = parse_keyed(o->pooled_random, "--pooled-random");
                        const auto wp_files = parse_keyed(o->pooled_wordpiece, "--pooled-wordpiece");
                        std::map<std::string, std::pair<fs::path, fs::path>> wp_paths;
                        for (const auto& [name, spec] : wp_files) {
                            const auto s = spec.string();
                            const auto colon = s.find(':');
                            if (colon == std::string::npos) {
                                fail(ErrorCode::invalid_argument, "--pooled-wordpiece expects NAME=TABLE:VOCAB");
                            }
                            wp_paths[name] = {s.substr(0, colon), s.substr(colon + 1)};
                            run.input("wordpiece table " + name, wp_paths[name].first);
                            run.input("wordpiece vocab " + name, wp_paths[name].second);
                        }
                        for (const auto& [name, file] : vec_files) {
                            run.input("vectors " + name, file);
                        }
                        record_seeds(run, o->train);
                        run.seed("oov", o->oov_seed);

                        const auto ds = load_dataset(o->dataset);
                        std::map<std::size_t, EmbeddingStore> stores;
                        ContextSweepInput input;
                        for (const auto& [k, dir] : store_dirs) {
                            std::size_t kv = 0;
                            try {
                                kv = std::stoul(k);
                            } catch (const std::exception&) {
                                fail(ErrorCode::invalid_argument, "context size must be a number: '" + k + "'");
                            }
                            stores.emplace(kv, EmbeddingStore::open(dir));
                        }
                        for (const auto& [k, s] : stores) {
                            input.stores[k] = &s;
                        }
                        input.layer_tags = o->layers;
                        input.context_sizes = o->sizes;
                        if (input.context_sizes.empty()) {
                            for (const auto& [k, _] : stores) {
                                input.context_sizes.push_back(k);
                            }
                        }
                        if (input.context_sizes.empty()) {
                            input.context_sizes = default_context_sizes;
                        }
                        // spaces and tokenizers must outlive the resolvers that point at them
                        std::vector<std::unique_ptr<TypeLevelSpace>> spaces;
                        std::vector<std::unique_ptr<WordpieceTokenizer>> tokenizers;
                        for (const auto& [name, file] : vec_files) {
                            spaces.push_back(std::make_unique<TypeLevelSpace>(load_vectors(file)));
                            input.pooled.push_back({name, WordResolver{spaces.back().get(), o->oov_seed}});
                        }
                        for (const auto& [name, dim] : rand_dims) {
                            std::size_t d = 0;
                            try {
                                d = std::stoul(dim.string());
                            } catch (const std::exception&) {
                                fail(ErrorCode::invalid_argument, "--pooled-random expects NAME=DIM");
                            }
                            spaces.push_back(std::make_unique<TypeLevelSpace>(name, d));
                            input.pooled.push_back({name, WordResolver{spaces.back().get(), o->oov_seed}});
                        }
                        for (const auto& [name, paths] : wp_paths) {
                            spaces.push_back(std::make_unique<TypeLevelSpace>(load_vectors(paths.first)));
                            tokenizers.push_back(
                                std::make_unique<WordpieceTokenizer>(load_wordpiece_vocab(paths.second)));
                            input.pooled.push_back(
                                {name, WordpieceResolver{spaces.back().get(), tokenizers.back().get(), o->oov_seed}});
                        }
                        if (input.layer_tags.empty() && !stores.empty()) {
                            input.layer_tags = stores.begin()->second.manifest().layer_tags;
                        }
                        const auto reports = sweep_context_sizes(ds, input, experiment(o->train, run.jobs()));
                        write_reports(run, "sweep_context.csv", reports);
                        std::string curve = "name,layer,k,f1\n";
                        for (const auto& r : reports) {
                            curve += r.context.encoder_id + "," + r.context.layer_tag + "," +
                                     r.context.context_size + "," + fixed(r.f1()) + "\n";
                        }
                        run.write_text("context_f1.csv", curve);
                    };
                });

    add_command(app, "compare-finetuned",
                "Score pretrained probes on finetuned rows (setup a) and freshly trained ones (setup b)",
                [](CLI::App& cmd) {
                    struct Opts {
                        fs::path dataset, pretrained, finetuned, probes;
                        std::vector<std::string> layers;
                        TrainOpts train;
                    };
                    auto o = std::make_shared<Opts>();
                    cmd.add_option("--dataset", o->dataset, "dataset directory")->required();
                    cmd.add_option("--pretrained", o->pretrained, "pretrained store")->required();
                    cmd.add_option("--finetuned", o->finetuned, "finetuned store with identical records")
                        ->required();
                    cmd.add_option("--layers", o->layers, "layer tags (default: all)")->delimiter(',');
                    cmd.add_option("--probes", o->probes,
                                   "pretrained suites as <dir>/<layer>/ (default: trained here)");
                    add_train_options(cmd, o->train, true);
                    return [o](Run& run) {
                        run.input("dataset", o->dataset);
                        run.input("pretrained", o->pretrained);
                        run.input("finetuned", o->finetuned);
                        if (!o->probes.empty()) {
                            run.input("probes", o->probes);
                        }
                        record_seeds(run, o->train);
                        const auto ds = load_dataset(o->dataset);
                        const auto pre = EmbeddingStore::open(o->pretrained);
                        const auto ft = EmbeddingStore::open(o->finetuned);
                        require_same_records(pre.manifest(), ft.manifest());
                        const auto options = experiment(o->train, run.jobs());
                        const auto tags = o->layers.empty() ? pre.manifest().layer_tags : o->layers;
                        std::map<std::string, std::vector<ProbeModel>> suites;
                        if (!o->probes.empty()) {
                            for (const auto& tag : tags) {
                                suites[tag] = load_probe_suite(probe_dir(o->probes) / tag, ds.inventory().size());
                            }
                        } else {
                            train_and_sweep_layers(ds, pre, tags, options, &suites);
                        }
                        const auto cmp = compare_finetuned(ds, pre, ft, tags, suites, options);
                        std::vector<EvalReport> reports;
                        std::string csv = "layer,pretrained_f1,setup_a_f1,setup_b_f1,delta_a,delta_b\n";
                        for (const auto& c : cmp) {
                            csv += c.layer_tag + "," + fixed(c.pretrained.f1()) + "," + fixed(c.setup_a.f1()) + "," +
                                   fixed(c.setup_b.f1()) + "," + fixed(c.delta_a) + "," + fixed(c.delta_b) + "\n";
                            reports.push_back(c.pretrained);
                            reports.push_back(c.setup_a);
                            reports.push_back(c.setup_b);
                        }
                        write_reports(run, "reports.csv", reports);
                        run.write_text("comparison.csv", csv);
                    };
                });
}

}  // namespace scprobe::cli
