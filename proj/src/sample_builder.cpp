#include "ckbert/sample_builder.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ckbert/errors.hpp"

namespace ckbert {

EntityLinker::EntityLinker(const KnowledgeGraph& g) {
    const auto& surfaces = g.entity_surfaces();
    for (std::uint32_t i = 0; i < surfaces.size(); ++i) {
        auto toks = tokenize(surfaces[i]);
        if (toks.empty()) continue;
        by_first_[toks.front()].push_back({std::move(toks), EntityId{i}});
    }
    for (auto& [first, bucket] : by_first_) {
        std::stable_sort(bucket.begin(), bucket.end(),
                         [](const Surface& a, const Surface& b) { return a.tokens.size() > b.tokens.size(); });
    }
}

std::vector<EntityMention> EntityLinker::link(const std::vector<std::string>& tokens) const {
    std::vector<EntityMention> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        const Surface* hit = nullptr;
        if (auto it = by_first_.find(tokens[i]); it != by_first_.end()) {
            for (const auto& s : it->second) {
                if (i + s.tokens.size() <= tokens.size() &&
                    std::equal(s.tokens.begin(), s.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                    hit = &s;
                    break;
                }
            }
        }
        if (hit) {
            out.push_back({i, i + hit->tokens.size(), hit->entity});
            i += hit->tokens.size();
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<EntityMention> link_entities(const std::vector<std::string>& tokens, const KnowledgeGraph& g) {
    return EntityLinker(g).link(tokens);
}

std::vector<TokenId> verbalize(const Triple& t, const KnowledgeGraph& g, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 2) throw ContractViolation("verbalize: max_len must be >= 2");
    std::vector<TokenId> ids{kClsId};
    for (const auto* surface : {&g.entity_surface(t.head), &g.relation_surface(t.relation), &g.entity_surface(t.tail)}) {
        for (const auto& tok : tokenize(*surface)) ids.push_back(vocab.id(tok));
    }
    if (ids.size() + 1 > max_len) ids.resize(max_len - 1);
    ids.push_back(kSepId);
    return ids;
}

void BuildConfig::validate() const {
    if (negatives < 1) throw ConfigError("negatives (L) must be >= 1");
    if (delta < 2) throw ConfigError("delta must be >= 2");
    if (max_seq_len < 4) throw ConfigError("max_seq_len must be >= 4");
    if (!(mask.mask_ratio > 0.0 && mask.mask_ratio < 1.0)) throw ConfigError("mask_ratio must lie in (0, 1)");
    if (!(mask.random_frac >= 0.0 && mask.random_frac <= 1.0)) throw ConfigError("random_frac must lie in [0, 1]");
}

std::size_t TrainingInstance::masked_count() const {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                                  [](TokenId l) { return l != kIgnoreLabel; }));
}

namespace {

// Drops trailing tokens (and spans reaching into them) until the
// reconstruction fits in `budget` positions.
void fit_to_budget(AnnotatedSentence& s, std::size_t budget) {
    while (!s.tokens.empty() && s.tokens.size() + 2 * s.spans.size() > budget) {
        s.tokens.pop_back();
        const auto n = s.tokens.size();
        std::erase_if(s.spans, [n](const LinguisticSpan& sp) { return sp.start >= n; });
        for (auto& sp : s.spans) sp.end = std::min(sp.end, n);
    }
}

}  // namespace

std::optional<TrainingInstance> build_instance(const std::string& sentence, std::size_t line,
                                               const SpanProvider& annotator, const KnowledgeGraph& g,
                                               const EntityLinker& linker, const Vocab& vocab,
                                               const BuildConfig& cfg, Rng& rng) {
    cfg.validate();
    auto tokens = tokenize(sentence);
    if (tokens.empty()) return std::nullopt;
    auto annotated = annotate(std::move(tokens), annotator, line);
    fit_to_budget(annotated, cfg.max_seq_len - 2);
    if (annotated.tokens.empty()) return std::nullopt;
    const auto recon = reconstruct(annotated);
    if (recon.size() < 2) return std::nullopt;

    const auto mentions = linker.link(annotated.tokens);
    std::optional<EntityMention> target;
    std::vector<std::size_t> excluded;
    if (!mentions.empty()) {
        const auto& m = mentions[rng.uniform_index(mentions.size())];
        const auto o2r = recon.original_to_reconstructed();
        const auto rs = o2r[m.start];
        const auto re = o2r[m.end - 1] + 1;
        if (re - rs < recon.size()) {
            target = m;
            for (auto i = rs; i < re; ++i) excluded.push_back(i);
        }
    }

    const auto plan = plan_masks(recon, vocab, cfg.mask, rng, excluded);
    const auto masked = apply_masks(recon, plan, vocab, cfg.replacement, &rng);

    TrainingInstance inst;
    inst.input_ids.reserve(cfg.max_seq_len);
    inst.input_ids.push_back(kClsId);
    inst.input_ids.insert(inst.input_ids.end(), masked.ids.begin(), masked.ids.end());
    inst.input_ids.push_back(kSepId);
    inst.attention_length = inst.input_ids.size();
    inst.input_ids.resize(cfg.max_seq_len, kPadId);
    inst.labels.assign(cfg.max_seq_len, kIgnoreLabel);
    std::copy(masked.labels.begin(), masked.labels.end(), inst.labels.begin() + 1);

    if (target) {
        inst.entity_start = excluded.front() + 1;
        inst.entity_end = excluded.back() + 2;
        auto positive = g.sample_positive(target->entity, rng);
        auto negatives = g.sample_negatives(target->entity, cfg.negatives, cfg.delta, rng);
        if (positive && negatives) {
            inst.cmrm_active = true;
            inst.positive_triple = *positive;
            inst.positive_ids = verbalize(*positive, g, vocab, cfg.max_seq_len);
            inst.negative_triples = std::move(*negatives);
            for (const auto& t : inst.negative_triples) {
                inst.negative_ids.push_back(verbalize(t, g, vocab, cfg.max_seq_len));
            }
        }
    }
    return inst;
}

// --- shard IO -------------------------------------------------------------------

namespace {

nlohmann::ordered_json triple_json(const Triple& t) {
    return nlohmann::json::array({to_index(t.head), to_index(t.relation), to_index(t.tail)});
}

Triple triple_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw DataError("triple must be [head, relation, tail]");
    return {EntityId{j[0].get<std::uint32_t>()}, RelationId{j[1].get<std::uint32_t>()},
            EntityId{j[2].get<std::uint32_t>()}};
}

}  // namespace

std::string instance_to_json(const TrainingInstance& inst) {
    nlohmann::ordered_json j;
    j["input_ids"] = inst.input_ids;
    j["labels"] = inst.labels;
    j["attention_length"] = inst.attention_length;
    j["entity_span"] = {inst.entity_start, inst.entity_end};
    j["positive_ids"] = inst.positive_ids;
    j["negative_ids"] = inst.negative_ids;
    j["positive_triple"] = inst.positive_triple ? triple_json(*inst.positive_triple) : nlohmann::ordered_json::array();
    j["negative_triples"] = nlohmann::ordered_json::array();
    for (const auto& t : inst.negative_triples) j["negative_triples"].push_back(triple_json(t));
    j["cmrm_active"] = inst.cmrm_active ? 1 : 0;
    return j.dump();
}

TrainingInstance instance_from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        TrainingInstance inst;
        j.at("input_ids").get_to(inst.input_ids);
        j.at("labels").get_to(inst.labels);
        j.at("attention_length").get_to(inst.attention_length);
        const auto& span = j.at("entity_span");
        inst.entity_start = span.at(0).get<std::size_t>();
        inst.entity_end = span.at(1).get<std::size_t>();
        j.at("positive_ids").get_to(inst.positive_ids);
        j.at("negative_ids").get_to(inst.negative_ids);
        if (const auto& p = j.at("positive_triple"); !p.empty()) inst.positive_triple = triple_from_json(p);
        for (const auto& t : j.at("negative_triples")) inst.negative_triples.push_back(triple_from_json(t));
        inst.cmrm_active = j.at("cmrm_active").get<int>() != 0;
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed instance record: ") + e.what());
    }
}

void write_shard(std::ostream& out, const std::vector<TrainingInstance>& instances) {
    for (const auto& inst : instances) out << instance_to_json(inst) << '\n';
}

std::vector<TrainingInstance> read_shard(std::istream& in) {
    std::vector<TrainingInstance> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(instance_from_json(line));
        } catch (const DataError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

}  // namespace ckbert
