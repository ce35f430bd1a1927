#include "scprobe/baselines.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "scprobe/error.hpp"
#include "scprobe/random.hpp"
#include "text_util.hpp"

namespace scprobe {

std::vector<float> random_vector(std::string_view word, std::size_t dim, std::uint64_t seed) {
    Rng rng(derive_seed(seed, word));
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = static_cast<float>(standard_normal(rng));
    }
    return v;
}

TypeLevelSpace random_space(std::span<const std::string> vocab, std::size_t dim, std::uint64_t seed,
                            std::string name) {
    TypeLevelSpace space(std::move(name), dim);
    for (const auto& w : vocab) {
        space.set(w, random_vector(w, dim, seed));
    }
    return space;
}

std::size_t fill_oov(TypeLevelSpace& space, std::span<const std::string> words, std::uint64_t seed) {
    std::size_t added = 0;
    for (const auto& w : words) {
        if (!space.contains(w)) {
            space.set(w, random_vector(w, space.dim(), seed));
            ++added;
        }
    }
    return added;
}

TypeLevelSpace load_vectors(std::istream& in, std::string name, VectorFileStats* stats) {
    VectorFileStats local;
    std::optional<TypeLevelSpace> space;
    std::string line;
    std::size_t line_number = 0;
    std::vector<float> values;
    while (std::getline(in, line)) {
        ++line_number;
        detail::strip_cr(line);
        const auto fields = detail::split_whitespace(line);
        if (fields.empty()) {
            continue;
        }
        if (line_number == 1 && fields.size() == 2 && detail::parse_number<std::size_t>(fields[0]) &&
            detail::parse_number<std::size_t>(fields[1])) {
            local.had_header = true;
            continue;
        }
        const std::size_t width = fields.size() - 1;
        if (width == 0) {
            fail(ErrorCode::parse_error, "line " + std::to_string(line_number) + ": word without values");
        }
        if (!space) {
            space.emplace(name, width);
        } else if (width != space->dim()) {
            fail(ErrorCode::dimension_mismatch, "line " + std::to_string(line_number) + ": expected " +
                                                    std::to_string(space->dim()) + " values, found " +
                                                    std::to_string(width));
        }
        values.resize(width);
        for (std::size_t i = 0; i < width; ++i) {
            auto parsed = detail::parse_number<float>(fields[i + 1]);
            if (!parsed || !std::isfinite(*parsed)) {
                fail(ErrorCode::parse_error, "line " + std::to_string(line_number) + ": bad number '" +
                                                 std::string(fields[i + 1]) + "'");
            }
            values[i] = *parsed;
        }
        if (space->set(fields[0], values)) {
            ++local.duplicates;
        }
        ++local.lines;
    }
    if (stats) {
        *stats = local;
    }
    if (!space) {
        return TypeLevelSpace(std::move(name), 0);
    }
    return std::move(*space);
}

TypeLevelSpace load_vectors(const std::filesystem::path& path, VectorFileStats* stats) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::missing_input, "cannot open " + path.string());
    }
    return load_vectors(in, path.stem().string(), stats);
}

void write_vectors(std::ostream& out, const TypeLevelSpace& space) {
    out.precision(9);
    for (std::size_t i = 0; i < space.size(); ++i) {
        out << space.word(i);
        for (float x : space.vector(i)) {
            out << ' ' << x;
        }
        out << '\n';
    }
}

std::vector<float> mean_pool(std::span<const std::span<const float>> vectors) {
    if (vectors.empty()) {
        fail(ErrorCode::invalid_argument, "mean_pool of an empty list");
    }
    const std::size_t dim = vectors.front().size();
    std::vector<double> sum(dim, 0.0);
    for (const auto& v : vectors) {
        if (v.size() != dim) {
            fail(ErrorCode::dimension_mismatch, "mean_pool over vectors of different widths");
        }
        for (std::size_t j = 0; j < dim; ++j) {
            sum[j] += v[j];
        }
    }
    std::vector<float> out(dim);
    const auto n = static_cast<double>(vectors.size());
    for (std::size_t j = 0; j < dim; ++j) {
        out[j] = static_cast<float>(sum[j] / n);
    }
    return out;
}

std::vector<float> mean_pool(const std::vector<std::vector<float>>& vectors) {
    std::vector<std::span<const float>> views(vectors.begin(), vectors.end());
    return mean_pool(std::span<const std::span<const float>>(views));
}

// ---------------------------------------------------------------- resolvers

std::vector<float> WordResolver::token(std::string_view token) const {
    if (auto v = space->find(token)) {
        return {v->begin(), v->end()};
    }
    return random_vector(token, space->dim(), oov_seed);
}

std::vector<float> WordResolver::word(std::string_view word) const {
    if (auto v = space->find(word)) {
        return {v->begin(), v->end()};
    }
    const auto members = detail::split_whitespace(word);
    if (members.size() <= 1) {
        return random_vector(word, space->dim(), oov_seed);
    }
    std::vector<std::vector<float>> vectors;
    for (auto m : members) {
        vectors.push_back(token(m));
    }
    return mean_pool(vectors);
}

std::vector<std::string> WordpieceResolver::pieces(std::span<const std::string> words) const {
    std::vector<std::string> out;
    for (const auto& w : words) {
        for (auto member : detail::split_whitespace(w)) {
            auto p = tokenizer->tokenize_word(member);
            out.insert(out.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
        }
    }
    return out;
}

std::vector<float> WordpieceResolver::piece(std::string_view piece) const {
    if (auto v = table->find(piece)) {
        return {v->begin(), v->end()};
    }
    return random_vector(piece, table->dim(), oov_seed);
}

std::vector<float> WordpieceResolver::word(std::string_view word) const {
    const std::string w(word);
    const auto p = pieces(std::span(&w, 1));
    if (p.empty()) {
        return random_vector(word, table->dim(), oov_seed);
    }
    std::vector<std::vector<float>> vectors;
    for (const auto& piece_text : p) {
        vectors.push_back(piece(piece_text));
    }
    return mean_pool(vectors);
}

TypeLevelSpace compose_space(std::span<const std::string> words, const WordResolver& resolver, std::string name) {
    TypeLevelSpace out(std::move(name), resolver.space->dim());
    for (const auto& w : words) {
        out.set(w, resolver.word(w));
    }
    return out;
}

TypeLevelSpace compose_space(std::span<const std::string> words, const WordpieceResolver& resolver,
                             std::string name) {
    TypeLevelSpace out(std::move(name), resolver.table->dim());
    for (const auto& w : words) {
        out.set(w, resolver.word(w));
    }
    return out;
}

// ------------------------------------------------------------------- anchors

namespace {

struct AnchorAccumulator {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::pair<std::vector<double>, std::size_t>> sums;

    void add(const std::string& word, std::span<const float> row) {
        auto [it, inserted] = sums.try_emplace(word);
        if (inserted) {
            order.push_back(word);
            it->second.first.assign(row.size(), 0.0);
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            it->second.first[j] += row[j];
        }
        ++it->second.second;
    }

    TypeLevelSpace finish(std::string name, std::size_t dim) const {
        TypeLevelSpace out(std::move(name), dim);
        std::vector<float> v(dim);
        for (const auto& w : order) {
            const auto& [sum, count] = sums.at(w);
            for (std::size_t j = 0; j < dim; ++j) {
                v[j] = static_cast<float>(sum[j] / static_cast<double>(count));
            }
            out.set(w, v);
        }
        return out;
    }
};

}  // namespace

TypeLevelSpace build_anchor_space(const EmbeddingStore& store, const std::string& layer_tag) {
    const auto layer = store.load_layer(layer_tag);
    AnchorAccumulator acc;
    for (const auto& r : store.manifest().records) {
        acc.add(r.word, layer.row(r.row_index));
    }
    return acc.finish("AVG-" + layer_tag, store.dim());
}

TypeLevelSpace build_anchor_space(const EmbeddingStore& store, const std::string& layer_tag,
                                  const ProbingDataset& dataset) {
    const auto layer = store.load_layer(layer_tag);
    std::vector<std::pair<std::size_t, const ContextOccurrence*>> rows;
    for (Split s : all_splits) {
        for (const auto& occ : dataset.occurrences(s)) {
            auto row = store.row_of(occ.occurrence_id);
            if (!row) {
                fail(ErrorCode::missing_row, "store has no row for occurrence_id " + std::to_string(occ.occurrence_id));
            }
            rows.emplace_back(*row, &occ);
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    AnchorAccumulator acc;
    for (const auto& [row, occ] : rows) {
        acc.add(occ->word, layer.row(row));
    }
    return acc.finish("AVG-" + layer_tag, store.dim());
}

// ------------------------------------------------------------------ pooling

std::vector<float> pooled_contextualizer(const WordResolver& resolver, const ContextOccurrence& occurrence) {
    std::vector<std::vector<float>> vectors;
    vectors.reserve(occurrence.tokens.size());
    for (const auto& t : occurrence.tokens) {
        vectors.push_back(resolver.token(t));
    }
    return mean_pool(vectors);
}

std::vector<float> pooled_contextualizer(const WordpieceResolver& resolver, const ContextOccurrence& occurrence) {
    std::vector<std::vector<float>> vectors;
    for (const auto& p : resolver.pieces(occurrence.tokens)) {
        vectors.push_back(resolver.piece(p));
    }
    if (vectors.empty()) {
        fail(ErrorCode::invalid_argument, "occurrence " + std::to_string(occurrence.occurrence_id) +
                                              " has no wordpieces");
    }
    return mean_pool(vectors);
}

}  // namespace scprobe
