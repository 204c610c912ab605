#pragma once
// Synthetic corpus + annotations + KG + vocabulary for desk-scale runs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ckbert/kg.hpp"

namespace ckbert {

enum class FixtureTopology { chain, star, tree, random };

FixtureTopology topology_from_string(const std::string& s);

struct FixtureSpec {
    std::size_t sentences = 200;
    std::size_t entities = 40;
    std::size_t relations = 8;
    FixtureTopology topology = FixtureTopology::chain;
    // Minimum share of entities that must have >= `negatives` hard-negative
    // candidates at `delta`.
    double negative_fraction = 0.5;
    std::size_t negatives = 3;
    std::uint32_t delta = 3;
    std::uint64_t seed = 7;
};

struct FixtureData {
    std::vector<std::string> corpus;       // one sentence per line
    std::vector<std::string> annotations;  // sidecar JSON records
    std::vector<std::string> kg_lines;     // head \t relation \t tail
    std::vector<std::string> vocab;        // full vocabulary, reserved entries first
};

struct FixturePaths {
    std::string corpus, annotations, kg, vocab;
};

// Throws DataError naming the violated constraint when the spec cannot be met.
FixtureData generate_fixture(const FixtureSpec& spec);
FixturePaths write_fixture(const FixtureData& data, const std::string& out_dir);
KnowledgeGraph fixture_graph(const FixtureData& data);

}  // namespace ckbert
