// ckbert: command-line front end for the pre-training pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ckbert/checkpoint.hpp"
#include "ckbert/config.hpp"
#include "ckbert/errors.hpp"
#include "ckbert/fixture.hpp"
#include "ckbert/gradcheck.hpp"
#include "ckbert/kg.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/sample_builder.hpp"
#include "ckbert/train.hpp"
#include "ckbert/vocab.hpp"

using namespace ckbert;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(std::move(line));
    }
    return out;
}

ordered_json triple_json(const Triple& t, const KnowledgeGraph& g) {
    return ordered_json::array({g.entity_surface(t.head), g.relation_surface(t.relation), g.entity_surface(t.tail)});
}

int run_build_kg(const std::string& path) {
    const auto g = load_kg_file(path);
    std::cout << stats_json(g.stats()) << '\n';
    return 0;
}

int run_plan_masks(const std::string& corpus, const std::string& annotations, const std::string& vocab_path,
                   std::uint64_t seed, const MaskOptions& mo) {
    const auto vocab = Vocab::load_file(vocab_path);
    std::unique_ptr<SpanProvider> annotator = std::make_unique<NullAnnotator>();
    if (!annotations.empty()) annotator = std::make_unique<SidecarAnnotator>(SidecarAnnotator::load_file(annotations));
    const auto lines = read_lines(corpus);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto annotated = annotate(tokenize(lines[i]), *annotator, i);
        const auto r = reconstruct(annotated);
        Rng rng(derive_seed(seed, i));
        ordered_json j;
        j["line"] = i;
        j["tokens"] = r.tokens;
        try {
            const auto plan = plan_masks(r, vocab, mo, rng);
            auto positions = ordered_json::array();
            for (const auto& p : plan.positions) {
                positions.push_back({{"index", p.index},
                                     {"kind", p.kind == MaskKind::linguistic ? "linguistic" : "random"},
                                     {"token", r.tokens[p.index]}});
            }
            j["positions"] = positions;
        } catch (const SentenceRejected& e) {
            j["rejected"] = e.what();
        }
        std::cout << j.dump() << '\n';
    }
    return 0;
}

int run_sample_triples(const std::string& kg, const std::vector<std::string>& entities, std::size_t negatives,
                       std::uint32_t delta, std::uint64_t seed) {
    const auto g = load_kg_file(kg);
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const auto e = g.find_entity(entities[i]);
        if (!e) throw LookupError("unknown entity: " + entities[i]);
        Rng rng(derive_seed(seed, to_index(*e)));
        ordered_json j;
        j["entity"] = entities[i];
        const auto pos = g.sample_positive(*e, rng);
        j["positive"] = pos ? triple_json(*pos, g) : ordered_json();
        const auto negs = g.sample_negatives(*e, negatives, delta, rng);
        auto arr = ordered_json::array();
        if (negs) {
            for (const auto& t : *negs) arr.push_back(triple_json(t, g));
        }
        j["negatives"] = arr;
        j["negative_candidates"] = g.candidate_negatives(*e, delta).size();
        std::cout << j.dump() << '\n';
    }
    return 0;
}

int run_inspect(const std::string& path, bool values) {
    const auto data = read_checkpoint_data(path);
    ordered_json j;
    j["version"] = data.version;
    j["header"] = data.header;
    auto arrays = ordered_json::array();
    std::size_t total = 0;
    for (const auto& a : data.arrays) {
        ordered_json e;
        e["name"] = a.name;
        e["shape"] = a.dims;
        total += a.values.size();
        if (values) e["values"] = a.values;
        arrays.push_back(e);
    }
    j["arrays"] = arrays;
    j["scalars"] = total;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int run_check_grads(const GradCheckOptions& opts, double threshold) {
    const auto rep = check_gradients(opts);
    for (const auto& g : rep.groups) {
        std::printf("%-28s checked %6zu  max_rel_error %.3e\n", g.name.c_str(), g.checked, g.max_rel_error);
    }
    std::printf("max relative error %.3e (%s) in %.1f s\n", rep.max_rel_error, rep.worst_group.c_str(), rep.seconds);
    return rep.max_rel_error < threshold ? 0 : static_cast<int>(ExitCode::numeric);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-enhanced masked-LM pre-training at desk scale"};
    app.require_subcommand(1);

    // build-kg
    std::string kg_path;
    auto* build_kg = app.add_subcommand("build-kg", "Load a triple file and print graph statistics");
    build_kg->add_option("kg", kg_path, "Tab-separated head/relation/tail file")->required();

    // plan-masks
    std::string corpus, annotations, vocab_path;
    std::uint64_t seed = 42;
    MaskOptions mo;
    auto* plan = app.add_subcommand("plan-masks", "Print mask plans for every corpus line as JSON lines");
    plan->add_option("--corpus", corpus)->required();
    plan->add_option("--annotations", annotations, "Span sidecar (JSON lines)");
    plan->add_option("--vocab", vocab_path)->required();
    plan->add_option("--seed", seed);
    plan->add_option("--mask-ratio", mo.mask_ratio);
    plan->add_option("--random-frac", mo.random_frac);

    // sample-triples
    std::vector<std::string> entities;
    std::size_t negatives = 3;
    std::uint32_t delta = 3;
    auto* sample = app.add_subcommand("sample-triples", "Draw a positive and negatives for the listed entities");
    sample->add_option("--kg", kg_path)->required();
    sample->add_option("--entity", entities)->required();
    sample->add_option("--negatives", negatives);
    sample->add_option("--delta", delta);
    sample->add_option("--seed", seed);

    // gen-fixture
    FixtureSpec fs;
    std::string topology = "chain", out_dir;
    auto* gen = app.add_subcommand("gen-fixture", "Write a synthetic corpus, annotations, KG and vocabulary");
    gen->add_option("--out", out_dir)->required();
    gen->add_option("--sentences", fs.sentences);
    gen->add_option("--entities", fs.entities);
    gen->add_option("--relations", fs.relations);
    gen->add_option("--topology", topology)->check(CLI::IsMember({"chain", "star", "tree", "random"}));
    gen->add_option("--negative-fraction", fs.negative_fraction);
    gen->add_option("--negatives", fs.negatives);
    gen->add_option("--delta", fs.delta);
    gen->add_option("--seed", fs.seed);

    // pretrain
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flag_values;
    std::size_t progress_every = 10;
    auto* pre = app.add_subcommand("pretrain", "Run pre-training");
    pre->add_option("--config", config_path, "key = value config file");
    pre->add_option("--set", sets, "key=value override (repeatable)");
    pre->add_option("--progress-every", progress_every);
    for (const auto& key : config_keys()) {
        auto name = key;
        for (auto& c : name) c = c == '_' ? '-' : c;
        pre->add_option("--" + name, flag_values[key], "config key " + key);
    }

    // check-grads
    GradCheckOptions gco;
    double threshold = 1e-4;
    auto* grads = app.add_subcommand("check-grads", "Finite-difference check of every parameter group");
    grads->add_option("--seed", gco.seed);
    grads->add_option("--step", gco.step);
    grads->add_option("--max-per-group", gco.max_per_group, "0 checks every coordinate");
    grads->add_option("--threshold", threshold);

    // inspect-checkpoint
    std::string ckpt;
    bool values = false;
    auto* inspect = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's header and array shapes");
    inspect->add_option("checkpoint", ckpt)->required();
    inspect->add_flag("--values", values, "Also dump array values");

    // build-instances
    std::size_t count = 10;
    auto* inst = app.add_subcommand("build-instances", "Print the first training instances as JSON lines");
    inst->add_option("--config", config_path);
    inst->add_option("--set", sets);
    inst->add_option("--count", count);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    auto overrides = [&]() {
        ConfigOverrides ov;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& key : config_keys()) {
            if (!flag_values[key].empty()) ov.emplace_back(key, flag_values[key]);
        }
        return ov;
    };
    auto load_config = [&]() {
        return config_path.empty() ? parse_config(overrides()) : parse_config_file(config_path, overrides());
    };

    try {
        if (*build_kg) return run_build_kg(kg_path);
        if (*plan) return run_plan_masks(corpus, annotations, vocab_path, seed, mo);
        if (*sample) return run_sample_triples(kg_path, entities, negatives, delta, seed);
        if (*gen) {
            fs.topology = topology_from_string(topology);
            const auto paths = write_fixture(generate_fixture(fs), out_dir);
            std::cout << paths.corpus << '\n' << paths.annotations << '\n' << paths.kg << '\n' << paths.vocab << '\n';
            return 0;
        }
        if (*pre) {
            const auto cfg = load_config();
            TrainHooks hooks;
            hooks.progress = &std::cerr;
            hooks.progress_every = progress_every ? progress_every : 1;
            const auto r = pretrain(cfg, hooks);
            std::cout << r.final_checkpoint << '\n';
            return 0;
        }
        if (*grads) return run_check_grads(gco, threshold);
        if (*inspect) return run_inspect(ckpt, values);
        if (*inst) {
            const auto cfg = load_config();
            validate(cfg);
            const auto corpus_data = load_training_corpus(cfg);
            const auto bc = build_config(cfg);
            for (std::uint64_t j = 0; j < count; ++j) {
                std::cout << instance_to_json(stream_instance(corpus_data, bc, cfg.seed, j)) << '\n';
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return 0;
}
