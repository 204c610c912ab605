#pragma once
// Assembles pre-training instances: masked sentence ids plus, when the
// sentence mentions a KG entity, one positive and L negative verbalized
// triples around that entity.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckbert/kg.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/vocab.hpp"

namespace ckbert {

struct EntityMention {
    std::size_t start = 0;  // original token index, inclusive
    std::size_t end = 0;    // exclusive
    EntityId entity{};

    friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

// Greedy longest exact match of tokenized entity surface forms.
class EntityLinker {
public:
    explicit EntityLinker(const KnowledgeGraph& g);
    std::vector<EntityMention> link(const std::vector<std::string>& tokens) const;

private:
    struct Surface {
        std::vector<std::string> tokens;
        EntityId entity{};
    };
    std::map<std::string, std::vector<Surface>> by_first_;  // longest first
};

std::vector<EntityMention> link_entities(const std::vector<std::string>& tokens, const KnowledgeGraph& g);

// [CLS] head relation tail [SEP], truncated to max_len with [SEP] kept last.
std::vector<TokenId> verbalize(const Triple& t, const KnowledgeGraph& g, const Vocab& vocab, std::size_t max_len);

struct BuildConfig {
    MaskOptions mask;
    ReplacementPolicy replacement = ReplacementPolicy::mask_only;
    std::size_t negatives = 3;  // L
    std::uint32_t delta = 3;
    std::size_t max_seq_len = 128;

    void validate() const;  // throws ConfigError
};

struct TrainingInstance {
    std::vector<TokenId> input_ids;  // [CLS] masked reconstruction [SEP] [PAD]..., length max_seq_len
    std::vector<TokenId> labels;     // original id at masked positions, kIgnoreLabel elsewhere
    std::size_t attention_length = 0;
    // Target entity span in input_ids coordinates ([CLS] at 0); empty when
    // there is no linked entity.
    std::size_t entity_start = 0;
    std::size_t entity_end = 0;
    std::vector<TokenId> positive_ids;
    std::vector<std::vector<TokenId>> negative_ids;
    std::optional<Triple> positive_triple;
    std::vector<Triple> negative_triples;
    bool cmrm_active = false;

    std::size_t masked_count() const;
    friend bool operator==(const TrainingInstance&, const TrainingInstance&) = default;
};

// Returns nullopt when the sentence is too short to mask.
std::optional<TrainingInstance> build_instance(const std::string& sentence, std::size_t line,
                                               const SpanProvider& annotator, const KnowledgeGraph& g,
                                               const EntityLinker& linker, const Vocab& vocab,
                                               const BuildConfig& cfg, Rng& rng);

// Shard format: one JSON object per line, all fields as integer arrays.
std::string instance_to_json(const TrainingInstance& inst);
TrainingInstance instance_from_json(const std::string& line);
void write_shard(std::ostream& out, const std::vector<TrainingInstance>& instances);
std::vector<TrainingInstance> read_shard(std::istream& in);

}  // namespace ckbert
