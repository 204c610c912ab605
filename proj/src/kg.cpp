#include "ckbert/kg.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ckbert/errors.hpp"

namespace ckbert {

namespace {

std::uint32_t intern(std::string_view s, std::vector<std::string>& table,
                     std::unordered_map<std::string, std::uint32_t>& index) {
    auto [it, inserted] = index.try_emplace(std::string(s), static_cast<std::uint32_t>(table.size()));
    if (inserted) table.emplace_back(s);
    return it->second;
}

}  // namespace

std::size_t KnowledgeGraph::Builder::TripleHash::operator()(const Triple& t) const noexcept {
    std::uint64_t h = to_index(t.head);
    h = h * 0x100000001b3ULL ^ to_index(t.relation);
    h = h * 0x100000001b3ULL ^ to_index(t.tail);
    return static_cast<std::size_t>(mix_seed(h));
}

KnowledgeGraph::Builder& KnowledgeGraph::Builder::add(std::string_view head, std::string_view relation,
                                                      std::string_view tail) {
    Triple t{EntityId{intern(head, entities_, entity_index_)},
             RelationId{intern(relation, relations_, relation_index_)},
             EntityId{intern(tail, entities_, entity_index_)}};
    if (seen_.try_emplace(t, triples_.size()).second) triples_.push_back(t);
    return *this;
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
    KnowledgeGraph g;
    g.entities_ = std::move(entities_);
    g.relations_ = std::move(relations_);
    g.entity_index_ = std::move(entity_index_);
    g.relation_index_ = std::move(relation_index_);
    g.triples_ = std::move(triples_);

    const std::size_t n = g.entities_.size();
    g.adj_offsets_.assign(n + 1, 0);
    for (const auto& t : g.triples_) {
        ++g.adj_offsets_[to_index(t.head) + 1];
        if (t.tail != t.head) ++g.adj_offsets_[to_index(t.tail) + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.adj_offsets_[i + 1] += g.adj_offsets_[i];
    g.adj_.resize(g.adj_offsets_[n]);
    std::vector<std::uint32_t> cursor(g.adj_offsets_.begin(), g.adj_offsets_.end() - 1);
    for (std::uint32_t i = 0; i < g.triples_.size(); ++i) {
        const auto& t = g.triples_[i];
        g.adj_[cursor[to_index(t.head)]++] = i;
        if (t.tail != t.head) g.adj_[cursor[to_index(t.tail)]++] = i;
    }
    return g;
}

void KnowledgeGraph::check_entity(EntityId e) const {
    if (to_index(e) >= entities_.size()) {
        throw LookupError("unknown entity id " + std::to_string(to_index(e)));
    }
}

const std::string& KnowledgeGraph::entity_surface(EntityId e) const {
    check_entity(e);
    return entities_[to_index(e)];
}

const std::string& KnowledgeGraph::relation_surface(RelationId r) const {
    if (to_index(r) >= relations_.size()) {
        throw LookupError("unknown relation id " + std::to_string(to_index(r)));
    }
    return relations_[to_index(r)];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view surface) const {
    auto it = entity_index_.find(std::string(surface));
    if (it == entity_index_.end()) return std::nullopt;
    return EntityId{it->second};
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view surface) const {
    auto it = relation_index_.find(std::string(surface));
    if (it == relation_index_.end()) return std::nullopt;
    return RelationId{it->second};
}

bool KnowledgeGraph::contains(const Triple& t) const {
    if (to_index(t.head) >= entities_.size()) return false;
    for (auto idx : incident(t.head)) {
        if (triples_[idx] == t) return true;
    }
    return false;
}

std::vector<std::uint32_t> KnowledgeGraph::incident(EntityId e) const {
    check_entity(e);
    const auto i = to_index(e);
    return {adj_.begin() + adj_offsets_[i], adj_.begin() + adj_offsets_[i + 1]};
}

std::vector<std::int32_t> KnowledgeGraph::distances_from(EntityId source,
                                                         std::optional<std::uint32_t> max_depth) const {
    check_entity(source);
    std::vector<std::int32_t> dist(entities_.size(), kUnreached);
    std::deque<std::uint32_t> queue;
    dist[to_index(source)] = 0;
    queue.push_back(to_index(source));
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        if (max_depth && static_cast<std::uint32_t>(dist[u]) >= *max_depth) continue;
        for (auto k = adj_offsets_[u]; k < adj_offsets_[u + 1]; ++k) {
            const auto& t = triples_[adj_[k]];
            const auto v = to_index(t.head) == u ? to_index(t.tail) : to_index(t.head);
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

HopResult KnowledgeGraph::hop_distance(EntityId a, EntityId b) const {
    check_entity(a);
    check_entity(b);
    if (a == b) return HopResult::hops(0);
    std::vector<std::int32_t> dist(entities_.size(), kUnreached);
    std::deque<std::uint32_t> queue;
    dist[to_index(a)] = 0;
    queue.push_back(to_index(a));
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto k = adj_offsets_[u]; k < adj_offsets_[u + 1]; ++k) {
            const auto& t = triples_[adj_[k]];
            const auto v = to_index(t.head) == u ? to_index(t.tail) : to_index(t.head);
            if (dist[v] != kUnreached) continue;
            dist[v] = dist[u] + 1;
            if (v == to_index(b)) return HopResult::hops(static_cast<std::uint32_t>(dist[v]));
            queue.push_back(v);
        }
    }
    return HopResult::unreachable();
}

std::vector<Triple> KnowledgeGraph::candidate_positives(EntityId target) const {
    std::vector<Triple> out;
    for (auto idx : incident(target)) out.push_back(triples_[idx]);
    return out;
}

std::optional<Triple> KnowledgeGraph::sample_positive(EntityId target, Rng& rng) const {
    const auto idx = incident(target);
    if (idx.empty()) return std::nullopt;
    return triples_[idx[rng.uniform_index(idx.size())]];
}

std::vector<Triple> KnowledgeGraph::candidate_negatives(EntityId target, std::uint32_t delta) const {
    if (delta < 2) throw ContractViolation("hop threshold must be >= 2");
    const auto dist = distances_from(target, delta);
    std::vector<std::uint32_t> picked;
    for (std::uint32_t u = 0; u < dist.size(); ++u) {
        if (dist[u] < 1) continue;
        for (auto k = adj_offsets_[u]; k < adj_offsets_[u + 1]; ++k) {
            const auto& t = triples_[adj_[k]];
            const auto dh = dist[to_index(t.head)];
            const auto dt = dist[to_index(t.tail)];
            if (dh == kUnreached || dt == kUnreached) continue;
            const auto far = std::max(dh, dt);
            // Visit each triple from its far endpoint only, so it is listed once.
            if (far >= 2 && static_cast<std::uint32_t>(far) <= delta && dist[u] == far) {
                picked.push_back(adj_[k]);
            }
        }
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    std::vector<Triple> out;
    out.reserve(picked.size());
    for (auto idx : picked) out.push_back(triples_[idx]);
    return out;
}

std::optional<std::vector<Triple>> KnowledgeGraph::sample_negatives(EntityId target, std::size_t count,
                                                                    std::uint32_t delta, Rng& rng) const {
    if (count < 1) throw ContractViolation("negative count must be >= 1");
    auto pool = candidate_negatives(target, delta);
    if (pool.empty()) return std::nullopt;
    std::vector<Triple> out;
    out.reserve(count);
    if (pool.size() >= count) {
        // Partial Fisher-Yates.
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + rng.uniform_index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
    }
    return out;
}

GraphStats KnowledgeGraph::stats() const {
    GraphStats s;
    s.entities = entities_.size();
    s.relations = relations_.size();
    s.triples = triples_.size();
    for (const auto& t : triples_) s.self_loops += t.head == t.tail;
    std::vector<std::int32_t> comp(entities_.size(), kUnreached);
    for (std::uint32_t i = 0; i < entities_.size(); ++i) {
        const auto degree = adj_offsets_[i + 1] - adj_offsets_[i];
        s.max_degree = std::max<std::size_t>(s.max_degree, degree);
        if (degree == 0) ++s.isolated_entities;
        if (comp[i] != kUnreached) continue;
        const auto d = distances_from(EntityId{i});
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (d[j] != kUnreached) comp[j] = static_cast<std::int32_t>(s.components);
        }
        ++s.components;
    }
    return s;
}

KnowledgeGraph load_kg(std::istream& in) {
    KnowledgeGraph::Builder builder;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        while (true) {
            const auto tab = rest.find('\t');
            fields.push_back(rest.substr(0, tab));
            if (tab == std::string_view::npos) break;
            rest.remove_prefix(tab + 1);
        }
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
        }
        for (const auto& f : fields) {
            if (f.empty()) throw ParseError(line_no, "empty field");
        }
        builder.add(fields[0], fields[1], fields[2]);
    }
    return std::move(builder).build();
}

KnowledgeGraph load_kg_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open knowledge graph file: " + path);
    return load_kg(in);
}

std::string stats_json(const GraphStats& s) {
    nlohmann::ordered_json j;
    j["entities"] = s.entities;
    j["relations"] = s.relations;
    j["triples"] = s.triples;
    j["isolated_entities"] = s.isolated_entities;
    j["self_loops"] = s.self_loops;
    j["components"] = s.components;
    j["max_degree"] = s.max_degree;
    return j.dump(2);
}

}  // namespace ckbert
