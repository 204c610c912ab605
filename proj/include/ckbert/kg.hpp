#pragma once
// Knowledge graph triple store.
//
// Entities and relations are dictionary-encoded in first-appearance order.
// Triples are stored once (duplicates dropped at load) and indexed by both
// endpoints, so hop queries treat every triple as an undirected edge.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ckbert/rng.hpp"

namespace ckbert {

enum class EntityId : std::uint32_t {};
enum class RelationId : std::uint32_t {};

constexpr std::uint32_t to_index(EntityId e) noexcept { return static_cast<std::uint32_t>(e); }
constexpr std::uint32_t to_index(RelationId r) noexcept { return static_cast<std::uint32_t>(r); }

struct Triple {
    EntityId head{};
    RelationId relation{};
    EntityId tail{};

    friend bool operator==(const Triple&, const Triple&) = default;
};

// Shortest undirected path length, or unreachable.
class HopResult {
public:
    static HopResult unreachable() { return HopResult{}; }
    static HopResult hops(std::uint32_t n) { return HopResult{n}; }

    bool reachable() const noexcept { return hops_.has_value(); }
    std::uint32_t value() const { return hops_.value(); }

    friend bool operator==(const HopResult&, const HopResult&) = default;

private:
    HopResult() = default;
    explicit HopResult(std::uint32_t n) : hops_(n) {}
    std::optional<std::uint32_t> hops_;
};

// Distance marker used in distance vectors for nodes not reached.
inline constexpr std::int32_t kUnreached = -1;

struct GraphStats {
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t triples = 0;
    std::size_t isolated_entities = 0;
    std::size_t self_loops = 0;
    std::size_t components = 0;
    std::size_t max_degree = 0;
};

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Builds a graph from surface-form triples; ids follow first appearance.
    class Builder {
    public:
        Builder& add(std::string_view head, std::string_view relation, std::string_view tail);
        KnowledgeGraph build() &&;

    private:
        std::vector<std::string> entities_;
        std::vector<std::string> relations_;
        std::unordered_map<std::string, std::uint32_t> entity_index_;
        std::unordered_map<std::string, std::uint32_t> relation_index_;
        std::vector<Triple> triples_;
        struct TripleHash {
            std::size_t operator()(const Triple& t) const noexcept;
        };
        std::unordered_map<Triple, std::size_t, TripleHash> seen_;
    };

    std::size_t entity_count() const noexcept { return entities_.size(); }
    std::size_t relation_count() const noexcept { return relations_.size(); }
    std::size_t triple_count() const noexcept { return triples_.size(); }

    const std::vector<Triple>& triples() const noexcept { return triples_; }
    const std::vector<std::string>& entity_surfaces() const noexcept { return entities_; }

    const std::string& entity_surface(EntityId e) const;
    const std::string& relation_surface(RelationId r) const;
    std::optional<EntityId> find_entity(std::string_view surface) const;
    std::optional<RelationId> find_relation(std::string_view surface) const;
    bool contains(const Triple& t) const;

    // Indices into triples() of every triple with `e` as head or tail.
    // A self-loop is listed once.
    std::vector<std::uint32_t> incident(EntityId e) const;

    // BFS distances from `source` to every entity (kUnreached if none).
    // With max_depth set, nodes beyond it are reported as kUnreached.
    std::vector<std::int32_t> distances_from(EntityId source,
                                             std::optional<std::uint32_t> max_depth = std::nullopt) const;

    HopResult hop_distance(EntityId a, EntityId b) const;

    // Triples incident to e_t: the one-hop positive candidates.
    std::vector<Triple> candidate_positives(EntityId target) const;
    std::optional<Triple> sample_positive(EntityId target, Rng& rng) const;

    // Triples whose far endpoint lies 2..delta hops from the target.
    std::vector<Triple> candidate_negatives(EntityId target, std::uint32_t delta) const;

    // `count` negatives: without replacement when enough candidates exist,
    // with replacement otherwise, nullopt when there are none.
    std::optional<std::vector<Triple>> sample_negatives(EntityId target, std::size_t count,
                                                        std::uint32_t delta, Rng& rng) const;

    GraphStats stats() const;

private:
    void check_entity(EntityId e) const;

    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, std::uint32_t> entity_index_;
    std::unordered_map<std::string, std::uint32_t> relation_index_;
    std::vector<Triple> triples_;
    // CSR adjacency: incident triple indices of entity i are
    // adj_[adj_offsets_[i] .. adj_offsets_[i + 1]).
    std::vector<std::uint32_t> adj_offsets_;
    std::vector<std::uint32_t> adj_;
};

// Reads head<TAB>relation<TAB>tail lines. Blank lines are skipped; line
// numbers in errors are 1-based.
KnowledgeGraph load_kg(std::istream& in);
KnowledgeGraph load_kg_file(const std::string& path);

std::string stats_json(const GraphStats& s);

}  // namespace ckbert
