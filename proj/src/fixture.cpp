#include "ckbert/fixture.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ckbert/errors.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/vocab.hpp"

namespace ckbert {

namespace {

constexpr std::string_view kCharPool =
    "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会自着去之过家学对可她里后小么心多"
    "天而能好都然没日于起还发成事只作当想看文无开手十用主行方又如前所本见经头面公同三已老从动两长知民样现分将外但身"
    "些与高意进把法此实回二理美点月明其种声全工己话儿者向情部正名定女问力机给等几很业最间新什打便位因重被走电四第门"
    "相次东政海口使教西再平真听世气信北少关并内加化由却代军产入先山五太水万市眼体别处总才场师书比住员九笑性通目华报"
    "立马命张活难神数件安表原车白应路期叫死常提感金何更反合放做系计或司利受光王果亲界及今京务制解各任至清物台象记边";

std::vector<std::string> pool_chars() { return tokenize(kCharPool); }

const char* const kDepLabels[] = {"subject-verb", "verb-object", "adverbial"};

}  // namespace

FixtureTopology topology_from_string(const std::string& s) {
    if (s == "chain") return FixtureTopology::chain;
    if (s == "star") return FixtureTopology::star;
    if (s == "tree") return FixtureTopology::tree;
    if (s == "random") return FixtureTopology::random;
    throw ConfigError("unknown topology '" + s + "' (valid: chain, star, tree, random)");
}

KnowledgeGraph fixture_graph(const FixtureData& data) {
    std::ostringstream text;
    for (const auto& l : data.kg_lines) text << l << '\n';
    std::istringstream in(text.str());
    return load_kg(in);
}

FixtureData generate_fixture(const FixtureSpec& spec) {
    if (spec.sentences == 0) throw DataError("fixture needs at least one sentence");
    if (spec.entities < 2) throw DataError("fixture needs at least two entities");
    if (spec.relations == 0) throw DataError("fixture needs at least one relation");
    if (!(spec.negative_fraction >= 0.0 && spec.negative_fraction <= 1.0)) {
        throw DataError("negative_fraction must lie in [0, 1]");
    }
    if (spec.topology == FixtureTopology::star && spec.negative_fraction > 0.0) {
        throw DataError(
            "infeasible fixture: a star graph puts every triple one hop from the center, so no entity can have "
            "negatives (negative_fraction must be 0 for topology=star)");
    }

    Rng rng(derive_seed(spec.seed, 0xF1C7));
    const auto chars = pool_chars();
    // Disjoint slices of the character pool for fillers, relations, entities.
    const std::size_t filler_count = 16;
    const std::size_t relation_chars = 12;
    const std::vector<std::string> fillers(chars.begin(), chars.begin() + filler_count);
    const std::vector<std::string> rel_pool(chars.begin() + filler_count,
                                            chars.begin() + filler_count + relation_chars);
    const std::vector<std::string> ent_pool(chars.begin() + filler_count + relation_chars, chars.end());

    auto draw_surface = [&rng](const std::vector<std::string>& pool, std::size_t len) {
        std::string s;
        for (std::size_t i = 0; i < len; ++i) s += pool[rng.uniform_index(pool.size())];
        return s;
    };
    auto unique_surfaces = [&](const std::vector<std::string>& pool, std::size_t count, std::size_t len,
                               const char* what) {
        std::vector<std::string> out;
        std::set<std::string> seen;
        std::size_t attempts = 0;
        while (out.size() < count) {
            if (++attempts > 100 * count + 1000) {
                throw DataError(std::string("fixture cannot draw enough distinct ") + what + " surface forms");
            }
            auto s = draw_surface(pool, len);
            if (seen.insert(s).second) out.push_back(std::move(s));
        }
        return out;
    };
    const std::size_t ent_len = spec.entities <= ent_pool.size() * ent_pool.size() / 4 ? 2 : 3;
    const auto entities = unique_surfaces(ent_pool, spec.entities, ent_len, "entity");
    const auto relations = unique_surfaces(rel_pool, spec.relations, 1 + (spec.relations > relation_chars), "relation");

    struct Edge {
        std::size_t head, rel, tail;
    };
    std::vector<Edge> edges;
    const std::size_t n = spec.entities;
    auto rel = [&] { return static_cast<std::size_t>(rng.uniform_index(spec.relations)); };
    switch (spec.topology) {
        case FixtureTopology::chain:
            for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, rel(), i + 1});
            break;
        case FixtureTopology::star:
            for (std::size_t i = 1; i < n; ++i) edges.push_back({0, rel(), i});
            break;
        case FixtureTopology::tree:
        case FixtureTopology::random:
            for (std::size_t i = 1; i < n; ++i) {
                const std::size_t back = 1 + rng.uniform_index(std::min<std::size_t>(i, 3));
                edges.push_back({i - back, rel(), i});
            }
            if (spec.topology == FixtureTopology::random) {
                for (std::size_t k = 0; k < n / 4; ++k) {
                    const auto a = rng.uniform_index(n), b = rng.uniform_index(n);
                    if (a != b) edges.push_back({a, rel(), b});
                }
            }
            break;
    }

    FixtureData data;
    for (const auto& e : edges) data.kg_lines.push_back(entities[e.head] + "\t" + relations[e.rel] + "\t" + entities[e.tail]);

    const auto g = fixture_graph(data);
    if (spec.negative_fraction > 0.0) {
        std::size_t satisfied = 0;
        for (std::uint32_t i = 0; i < g.entity_count(); ++i) {
            if (g.candidate_negatives(EntityId{i}, spec.delta).size() >= spec.negatives) ++satisfied;
        }
        const double share = static_cast<double>(satisfied) / static_cast<double>(g.entity_count());
        if (share < spec.negative_fraction) {
            throw DataError("infeasible fixture: only " + std::to_string(satisfied) + " of " +
                            std::to_string(g.entity_count()) + " entities have >= " + std::to_string(spec.negatives) +
                            " negatives at delta=" + std::to_string(spec.delta) + ", below the requested fraction " +
                            std::to_string(spec.negative_fraction));
        }
    }

    for (std::size_t s = 0; s < spec.sentences; ++s) {
        std::vector<std::string> toks;
        std::vector<LinguisticSpan> spans;
        auto push_surface = [&toks](const std::string& surface) {
            const auto t = tokenize(surface);
            toks.insert(toks.end(), t.begin(), t.end());
        };
        auto push_fillers = [&](std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) toks.push_back(fillers[rng.uniform_index(fillers.size())]);
        };
        if (rng.uniform_index(10) == 0) {
            push_fillers(6 + rng.uniform_index(5));
        } else {
            const auto& e = edges[rng.uniform_index(edges.size())];
            push_fillers(1 + rng.uniform_index(2));
            push_surface(entities[e.head]);
            const auto rel_start = toks.size();
            push_surface(relations[e.rel]);
            spans.push_back({rel_start, toks.size(), SpanKind::dep, kDepLabels[rng.uniform_index(3)]});
            push_surface(entities[e.tail]);
            const auto tail_fill = toks.size();
            push_fillers(1 + rng.uniform_index(3));
            if (rng.uniform_index(2) == 0) spans.push_back({tail_fill, toks.size(), SpanKind::sdp, "non-agent"});
        }
        std::string line;
        for (const auto& t : toks) line += t;
        data.corpus.push_back(std::move(line));
        data.annotations.push_back(sidecar_record(s, spans));
    }

    std::vector<std::string> used;
    std::set<std::string> seen;
    auto note = [&](const std::string& text) {
        for (auto& t : tokenize(text)) {
            if (seen.insert(t).second) used.push_back(std::move(t));
        }
    };
    for (const auto& f : fillers) note(f);
    for (const auto& r : relations) note(r);
    for (const auto& e : entities) note(e);
    for (const auto& line : data.corpus) note(line);
    const auto vocab = Vocab::with_reserved(used);
    for (std::size_t i = 0; i < vocab.size(); ++i) data.vocab.push_back(vocab.token(static_cast<TokenId>(i)));
    return data;
}

FixturePaths write_fixture(const FixtureData& data, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    FixturePaths paths{(dir / "corpus.txt").string(), (dir / "annotations.jsonl").string(),
                       (dir / "kg.tsv").string(), (dir / "vocab.txt").string()};
    auto dump = [](const std::string& path, const std::vector<std::string>& lines) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path);
        for (const auto& l : lines) out << l << '\n';
    };
    dump(paths.corpus, data.corpus);
    dump(paths.annotations, data.annotations);
    dump(paths.kg, data.kg_lines);
    dump(paths.vocab, data.vocab);
    return paths;
}

}  // namespace ckbert
