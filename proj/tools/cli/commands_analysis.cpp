// attn-sim, neighbors, report
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "run.hpp"
#include "scprobe/attnsim.hpp"
#include "scprobe/baselines.hpp"
#include "scprobe/error.hpp"
#include "scprobe/eval.hpp"
#include "scprobe/random.hpp"

namespace scprobe::cli {

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        fail(ErrorCode::missing_input, "cannot open " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void register_analysis_commands(CLI::App& app) {
    add_command(app, "attn-sim", "Mean per-example cosine of attention maps for every (layer, head)",
                [](CLI::App& cmd) {
                    struct Opts {
                        fs::path a, b;
                        std::size_t sample = 0;
                        std::uint64_t seed = 0;
                    };
                    auto o = std::make_shared<Opts>();
                    cmd.add_option("--a", o->a, "directory of <example_id>.attn dumps (e.g. pretrained)")
                        ->required();
                    cmd.add_option("--b", o->b, "directory of dumps to compare against (e.g. finetuned)")
                        ->required();
                    cmd.add_option("--sample", o->sample, "compare a seeded sample of N shared examples (0 = all)")
                        ->capture_default_str();
                    cmd.add_option("--seed", o->seed, "sampling seed")->capture_default_str();
                    return [o](Run& run) {
                        run.input("attention a", o->a);
                        run.input("attention b", o->b);
                        run.seed("sample", o->seed);
                        const auto a = read_attention_dir(o->a);
                        const auto b = read_attention_dir(o->b);
                        std::vector<std::string> sample;
                        if (o->sample > 0) {
                            for (const auto& d : a) {
                                sample.push_back(d.example_id);  // sorted by id already
                            }
                            Rng rng(derive_seed(o->seed, "attn-sample"));
                            shuffle(std::span(sample), rng);
                            sample.resize(std::min(sample.size(), o->sample));
                            std::sort(sample.begin(), sample.end());
                        }
                        const auto grid = build_grid(a, b, sample);
                        std::ostringstream csv;
                        write_grid_csv(csv, grid);
                        run.write_text("heatmap.csv", csv.str());
                        run.write_json("summary.json", {{"layers", grid.layers},
                                                        {"heads", grid.heads},
                                                        {"examples", grid.examples}});
                    };
                });

    add_command(app, "neighbors", "Nearest neighbours by cosine in a type-level space", [](CLI::App& cmd) {
        struct Opts {
            fs::path vectors, anchor_store;
            std::string anchor_layer;
            std::vector<std::string> queries;
            std::size_t k = 10;
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--vectors", o->vectors, "word vector text file");
        cmd.add_option("--anchor-store", o->anchor_store, "build the space by averaging each word's store rows");
        cmd.add_option("--anchor-layer", o->anchor_layer, "layer used with --anchor-store");
        cmd.add_option("--query", o->queries, "query words (repeatable or comma separated)")
            ->delimiter(',')
            ->required();
        cmd.add_option("--k", o->k, "neighbours per query")->capture_default_str();
        return [o](Run& run) {
            if (o->vectors.empty() == o->anchor_store.empty()) {
                fail(ErrorCode::invalid_argument, "give exactly one of --vectors or --anchor-store");
            }
            TypeLevelSpace space;
            if (!o->vectors.empty()) {
                run.input("vectors", o->vectors);
                space = load_vectors(o->vectors);
            } else {
                if (o->anchor_layer.empty()) {
                    fail(ErrorCode::invalid_argument, "--anchor-layer is required with --anchor-store");
                }
                run.input("anchor store", o->anchor_store);
                space = build_anchor_space(EmbeddingStore::open(o->anchor_store), o->anchor_layer);
            }
            std::string csv = "query,rank,word,cosine\n";
            nlohmann::json out = nlohmann::json::object();
            for (const auto& q : o->queries) {
                const auto nn = nearest_neighbors(space, q, o->k);
                nlohmann::json list = nlohmann::json::array();
                for (std::size_t i = 0; i < nn.size(); ++i) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%.6f", nn[i].similarity);
                    csv += q + "," + std::to_string(i + 1) + "," + nn[i].word + "," + buf + "\n";
                    list.push_back({{"word", nn[i].word}, {"cosine", nn[i].similarity}});
                }
                out[q] = list;
            }
            run.write_text("neighbors.csv", csv);
            run.write_json("neighbors.json", out);
        };
    });

    add_command(app, "report", "Merge the reports of earlier runs into one CSV", [](CLI::App& cmd) {
        struct Opts {
            std::vector<fs::path> inputs;
        };
        auto o = std::make_shared<Opts>();
        cmd.add_option("--inputs", o->inputs, "run directories (searched recursively) or report JSON files")
            ->required();
        return [o](Run& run) {
            std::vector<fs::path> files;
            for (const auto& in : o->inputs) {
                run.input("reports", in);
                if (fs::is_regular_file(in)) {
                    files.push_back(in);
                    continue;
                }
                std::vector<fs::path> found;
                for (const auto& e : fs::recursive_directory_iterator(in)) {
                    const auto name = e.path().filename().string();
                    if (e.is_regular_file() && (name == "report.json" || name == "reports.json")) {
                        found.push_back(e.path());
                    }
                }
                std::sort(found.begin(), found.end());
                files.insert(files.end(), found.begin(), found.end());
            }
            if (files.empty()) {
                fail(ErrorCode::missing_input, "no report.json or reports.json under the given inputs");
            }
            std::vector<EvalReport> all;
            nlohmann::json sources = nlohmann::json::array();
            for (const auto& f : files) {
                const auto text = slurp(f);
                std::vector<EvalReport> part;
                if (f.filename() == "report.json") {
                    part.push_back(report_from_json(text));
                } else {
                    part = reports_from_json(text);
                }
                sources.push_back({{"file", f.string()}, {"reports", part.size()}});
                for (auto& r : part) {
                    r.decisions.clear();
                    all.push_back(std::move(r));
                }
            }
            std::ostringstream csv;
            write_report_csv(csv, all);
            run.write_text("report.csv", csv.str());
            run.write_text("reports.json", reports_to_json(all) + "\n");
            run.write_json("sources.json", sources);
        };
    });
}

}  // namespace scprobe::cli
