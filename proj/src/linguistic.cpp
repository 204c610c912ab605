#include "ckbert/linguistic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ckbert {

const char* to_string(SpanKind k) noexcept { return k == SpanKind::dep ? "DEP" : "SDP"; }

SpanKind span_kind_from_string(std::string_view s) {
    if (s == "DEP") return SpanKind::dep;
    if (s == "SDP") return SpanKind::sdp;
    throw DataError("unknown span kind '" + std::string(s) + "' (expected DEP or SDP)");
}

SpanError::SpanError(LinguisticSpan span, std::size_t sentence_length)
    : Error("span [" + std::to_string(span.start) + ", " + std::to_string(span.end) + ") " +
            to_string(span.kind) + "/" + span.label + " is invalid for a sentence of " +
            std::to_string(sentence_length) + " tokens"),
      span_(std::move(span)) {}

// --- annotators -------------------------------------------------------------

DictionaryAnnotator::DictionaryAnnotator(std::vector<Entry> entries) {
    for (auto& e : entries) add(std::move(e));
}

void DictionaryAnnotator::add(Entry e) {
    if (e.tokens.empty()) throw DataError("dictionary entry with empty surface");
    auto& bucket = by_first_[e.tokens.front()];
    bucket.push_back(std::move(e));
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const Entry& a, const Entry& b) { return a.tokens.size() > b.tokens.size(); });
}

DictionaryAnnotator DictionaryAnnotator::load(std::istream& in) {
    DictionaryAnnotator d;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) throw ParseError(line_no, "expected surface<TAB>kind<TAB>label");
        Entry e;
        e.tokens = tokenize(line.substr(0, t1));
        if (e.tokens.empty()) throw ParseError(line_no, "empty surface");
        try {
            e.kind = span_kind_from_string(line.substr(t1 + 1, t2 - t1 - 1));
        } catch (const DataError& err) {
            throw ParseError(line_no, err.what());
        }
        e.label = line.substr(t2 + 1);
        d.add(std::move(e));
    }
    return d;
}

std::vector<LinguisticSpan> DictionaryAnnotator::spans_for(const std::vector<std::string>& tokens,
                                                           std::size_t) const {
    std::vector<LinguisticSpan> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
        const Entry* hit = nullptr;
        if (auto it = by_first_.find(tokens[i]); it != by_first_.end()) {
            for (const auto& e : it->second) {
                if (i + e.tokens.size() <= tokens.size() &&
                    std::equal(e.tokens.begin(), e.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                    hit = &e;
                    break;
                }
            }
        }
        if (hit) {
            out.push_back({i, i + hit->tokens.size(), hit->kind, hit->label});
            i += hit->tokens.size();
        } else {
            ++i;
        }
    }
    return out;
}

SidecarAnnotator SidecarAnnotator::load(std::istream& in) {
    SidecarAnnotator a;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto sentence = j.at("line").get<std::int64_t>();
            if (sentence < 0) throw ParseError(line_no, "negative line index");
            auto& spans = a.by_line_[static_cast<std::size_t>(sentence)];
            for (const auto& s : j.at("spans")) {
                if (!s.is_array() || s.size() != 4) throw ParseError(line_no, "span must be [start, end, kind, label]");
                const auto start = s.at(0).get<std::int64_t>();
                const auto end = s.at(1).get<std::int64_t>();
                if (start < 0 || end < 0) throw ParseError(line_no, "negative span bound");
                spans.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                                 span_kind_from_string(s.at(2).get<std::string>()), s.at(3).get<std::string>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const DataError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return a;
}

SidecarAnnotator SidecarAnnotator::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file: " + path);
    return load(in);
}

std::vector<LinguisticSpan> SidecarAnnotator::spans_for(const std::vector<std::string>&, std::size_t line) const {
    auto it = by_line_.find(line);
    return it == by_line_.end() ? std::vector<LinguisticSpan>{} : it->second;
}

std::string sidecar_record(std::size_t line, const std::vector<LinguisticSpan>& spans) {
    nlohmann::ordered_json j;
    j["line"] = line;
    j["spans"] = nlohmann::json::array();
    for (const auto& s : spans) j["spans"].push_back({s.start, s.end, to_string(s.kind), s.label});
    return j.dump();
}

// --- annotate / reconstruct ---------------------------------------------------

std::vector<LinguisticSpan> resolve_overlaps(std::vector<LinguisticSpan> spans) {
    std::stable_sort(spans.begin(), spans.end(), [](const LinguisticSpan& a, const LinguisticSpan& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.end > b.end;
    });
    std::vector<LinguisticSpan> kept;
    std::size_t frontier = 0;
    for (auto& s : spans) {
        if (!kept.empty() && s.start < frontier) continue;
        frontier = s.end;
        kept.push_back(std::move(s));
    }
    return kept;
}

AnnotatedSentence annotate(std::vector<std::string> tokens, const SpanProvider& provider, std::size_t line) {
    if (tokens.empty()) throw ContractViolation("annotate: empty token list");
    auto raw = provider.spans_for(tokens, line);
    for (auto& s : raw) {
        if (s.start >= s.end || s.start >= tokens.size()) throw SpanError(s, tokens.size());
        s.end = std::min(s.end, tokens.size());
    }
    return {std::move(tokens), resolve_overlaps(std::move(raw))};
}

std::vector<std::size_t> ReconstructedSentence::original_to_reconstructed() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < origin.size(); ++i) {
        if (origin[i] != kMarker) out.push_back(i);
    }
    return out;
}

ReconstructedSentence reconstruct(const AnnotatedSentence& s) {
    ReconstructedSentence r;
    r.tokens.reserve(s.tokens.size() + 2 * s.spans.size());
    auto push = [&r](std::string_view tok, std::size_t origin) {
        r.tokens.emplace_back(tok);
        r.origin.push_back(origin);
    };
    std::size_t next_span = 0;
    std::size_t open_at = 0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (next_span < s.spans.size() && s.spans[next_span].start == i) {
            open_at = r.tokens.size();
            push(s.spans[next_span].kind == SpanKind::dep ? special::dep_open : special::sdp_open,
                 ReconstructedSentence::kMarker);
        }
        push(s.tokens[i], i);
        if (next_span < s.spans.size() && s.spans[next_span].end == i + 1) {
            const auto kind = s.spans[next_span].kind;
            push(kind == SpanKind::dep ? special::dep_close : special::sdp_close, ReconstructedSentence::kMarker);
            r.span_positions.emplace_back(open_at, r.tokens.size());
            r.span_kinds.push_back(kind);
            ++next_span;
        }
    }
    return r;
}

std::vector<std::string> strip_markers(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        if (!is_marker(t)) out.push_back(t);
    }
    return out;
}

// --- masking --------------------------------------------------------------------

std::size_t round_half_up(double x) {
    if (!(x >= 0.0)) return 0;
    return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

namespace {

// Moves `count` uniformly chosen elements of pool[begin..) to the front of
// that range and returns how many were taken.
std::size_t draw_without_replacement(std::vector<std::size_t>& pool, std::size_t begin, std::size_t count,
                                     Rng& rng) {
    const auto take = std::min(count, pool.size() - begin);
    for (std::size_t i = begin; i < begin + take; ++i) {
        const auto j = i + rng.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    return take;
}

}  // namespace

MaskPlan plan_masks(const ReconstructedSentence& r, const Vocab& vocab, const MaskOptions& options, Rng& rng,
                    std::span<const std::size_t> excluded) {
    if (!(options.mask_ratio > 0.0 && options.mask_ratio < 1.0)) {
        throw ConfigError("mask_ratio must lie in (0, 1)");
    }
    if (!(options.random_frac >= 0.0 && options.random_frac <= 1.0)) {
        throw ConfigError("random_frac must lie in [0, 1]");
    }
    const std::size_t n = r.size();
    if (n < 2) throw SentenceRejected("sentence of " + std::to_string(n) + " tokens is too short to mask");

    std::vector<char> linguistic(n, 0);
    for (const auto& [open, close_end] : r.span_positions) {
        for (std::size_t i = open; i < close_end && i < n; ++i) linguistic[i] = 1;
    }
    std::vector<char> blocked(n, 0);
    for (auto e : excluded) {
        if (e < n) blocked[e] = 1;
    }
    std::vector<std::size_t> ling_pool;
    std::vector<std::size_t> rand_pool;
    for (std::size_t i = 0; i < n; ++i) {
        if (blocked[i]) continue;
        (linguistic[i] ? ling_pool : rand_pool).push_back(i);
    }

    const std::size_t budget =
        std::min(std::max<std::size_t>(1, round_half_up(options.mask_ratio * static_cast<double>(n))),
                 ling_pool.size() + rand_pool.size());
    const std::size_t ling_target =
        std::min(budget, round_half_up((1.0 - options.random_frac) * static_cast<double>(budget)));

    std::size_t ling_taken = draw_without_replacement(ling_pool, 0, ling_target, rng);
    const std::size_t rand_taken = draw_without_replacement(rand_pool, 0, budget - ling_taken, rng);
    if (ling_taken + rand_taken < budget) {
        ling_taken += draw_without_replacement(ling_pool, ling_taken, budget - ling_taken - rand_taken, rng);
    }

    MaskPlan plan;
    plan.positions.reserve(budget);
    for (std::size_t i = 0; i < ling_taken; ++i) {
        const auto idx = ling_pool[i];
        plan.positions.push_back({idx, MaskKind::linguistic, vocab.id(r.tokens[idx])});
    }
    for (std::size_t i = 0; i < rand_taken; ++i) {
        const auto idx = rand_pool[i];
        plan.positions.push_back({idx, MaskKind::random, vocab.id(r.tokens[idx])});
    }
    std::sort(plan.positions.begin(), plan.positions.end(),
              [](const MaskedPosition& a, const MaskedPosition& b) { return a.index < b.index; });
    return plan;
}

MaskedSequence apply_masks(const ReconstructedSentence& r, const MaskPlan& plan, const Vocab& vocab,
                           ReplacementPolicy policy, Rng* rng) {
    MaskedSequence out;
    out.ids = vocab.encode(r.tokens);
    out.labels.assign(out.ids.size(), kIgnoreLabel);
    if (policy == ReplacementPolicy::bert_80_10_10 && rng == nullptr) {
        throw ContractViolation("apply_masks: 80/10/10 replacement needs a random stream");
    }
    const auto first_regular = static_cast<TokenId>(special::all.size());
    for (const auto& p : plan.positions) {
        if (p.index >= out.ids.size()) {
            throw ContractViolation("apply_masks: position " + std::to_string(p.index) +
                                    " out of range for length " + std::to_string(out.ids.size()));
        }
        out.labels[p.index] = out.ids[p.index];
        if (policy == ReplacementPolicy::mask_only) {
            out.ids[p.index] = kMaskId;
            continue;
        }
        const double u = rng->uniform01();
        if (u < 0.8) {
            out.ids[p.index] = kMaskId;
        } else if (u < 0.9) {
            const auto regular = static_cast<TokenId>(vocab.size()) - first_regular;
            out.ids[p.index] =
                regular > 0 ? first_regular + static_cast<TokenId>(rng->uniform_index(static_cast<std::uint64_t>(regular)))
                            : kMaskId;
        }
    }
    return out;
}

}  // namespace ckbert
