#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ckbert/errors.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/vocab.hpp"
#include "oracles.hpp"

using namespace ckbert;

namespace {

std::vector<std::string> toks(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("t" + std::to_string(i));
    return out;
}

Vocab vocab_for(std::size_t n) { return Vocab::with_reserved(toks(n)); }

class FixedSpans final : public SpanProvider {
public:
    explicit FixedSpans(std::vector<LinguisticSpan> s) : spans_(std::move(s)) {}
    std::vector<LinguisticSpan> spans_for(const std::vector<std::string>&, std::size_t) const override {
        return spans_;
    }

private:
    std::vector<LinguisticSpan> spans_;
};

AnnotatedSentence with_spans(std::size_t n, std::vector<LinguisticSpan> spans) {
    return annotate(toks(n), FixedSpans(std::move(spans)));
}

}  // namespace

TEST_CASE("tokenize: CJK per character, ASCII runs whole") {
    CHECK(tokenize("北京大学") == std::vector<std::string>{"北", "京", "大", "学"});
    CHECK(tokenize("abc 12,x") == std::vector<std::string>{"abc", "12", ",", "x"});
    CHECK(tokenize("在BERT上") == std::vector<std::string>{"在", "BERT", "上"});
    CHECK(tokenize("  ").empty());
}

TEST_CASE("vocab: reserved entries and lookup") {
    const auto v = Vocab::with_reserved({"a", "b", "a", "[MASK]"});
    CHECK(v.size() == 11);
    CHECK(v.id("[PAD]") == kPadId);
    CHECK(v.id("[MASK]") == kMaskId);
    CHECK(v.id("[SDP]") == 7);
    CHECK(v.id("a") == 9);
    CHECK(v.id("zzz") == kUnkId);
    std::ostringstream out;
    v.save(out);
    std::istringstream in(out.str());
    const auto back = Vocab::load(in);
    CHECK(back.size() == v.size());
    CHECK(back.token(10) == "b");

    std::istringstream bad("[UNK]\n[PAD]\n");
    CHECK_THROWS_AS(Vocab::load(bad), Error);
}

TEST_CASE("annotate: no spans") {
    const auto s = annotate(toks(4), NullAnnotator{});
    CHECK(s.spans.empty());
    CHECK(s.tokens.size() == 4);
}

TEST_CASE("annotate: overlapping spans keep the leftmost") {
    const auto s = with_spans(6, {{1, 3, SpanKind::dep, "a"}, {2, 4, SpanKind::sdp, "b"}});
    REQUIRE(s.spans.size() == 1);
    CHECK(s.spans[0].start == 1);
    CHECK(s.spans[0].end == 3);
    // same start: the longer one wins
    const auto t = with_spans(6, {{1, 2, SpanKind::dep, "a"}, {1, 4, SpanKind::sdp, "b"}});
    REQUIRE(t.spans.size() == 1);
    CHECK(t.spans[0].end == 4);
}

TEST_CASE("annotate: bad spans surface the payload") {
    try {
        with_spans(4, {{5, 6, SpanKind::dep, "x"}});
        FAIL("expected a span error");
    } catch (const SpanError& e) {
        CHECK(e.span().start == 5);
        CHECK(e.span().label == "x");
    }
    CHECK_THROWS_AS(with_spans(4, {{2, 2, SpanKind::dep, "x"}}), SpanError);
    // an end past the sentence is clipped
    const auto s = with_spans(4, {{2, 9, SpanKind::dep, "x"}});
    CHECK(s.spans[0].end == 4);
}

TEST_CASE("dictionary annotator") {
    std::istringstream lex("t2 t3\tDEP\tverb-object\nt2\tSDP\tnon-agent\n");
    const auto dict = DictionaryAnnotator::load(lex);
    std::vector<std::string> sentence = {"t0", "t1", "t2", "t3", "t4", "t5"};
    const auto s = annotate(sentence, dict);
    REQUIRE(s.spans.size() == 1);
    CHECK(s.spans[0] == LinguisticSpan{2, 4, SpanKind::dep, "verb-object"});
}

TEST_CASE("sidecar annotator") {
    std::istringstream in(sidecar_record(1, {{0, 2, SpanKind::sdp, "non-agent"}}) + "\n");
    const auto side = SidecarAnnotator::load(in);
    CHECK(side.spans_for(toks(3), 0).empty());
    REQUIRE(side.spans_for(toks(3), 1).size() == 1);
    CHECK(side.spans_for(toks(3), 1)[0].kind == SpanKind::sdp);
    std::istringstream bad("{\"line\": 0, \"spans\": [[0, 1, \"XYZ\", \"l\"]]}\n");
    CHECK_THROWS_AS(SidecarAnnotator::load(bad), Error);
}

TEST_CASE("reconstruct") {
    SUBCASE("identity without spans") {
        const auto r = reconstruct(with_spans(3, {}));
        CHECK(r.tokens == toks(3));
    }
    SUBCASE("one SDP span") {
        const auto r = reconstruct(with_spans(6, {{2, 4, SpanKind::sdp, "non-agent"}}));
        CHECK(r.tokens == std::vector<std::string>{"t0", "t1", "[SDP]", "t2", "t3", "[/SDP]", "t4", "t5"});
        REQUIRE(r.span_positions.size() == 1);
        CHECK(r.span_positions[0] == std::pair<std::size_t, std::size_t>{2, 6});
        CHECK(r.origin[2] == ReconstructedSentence::kMarker);
        CHECK(r.origin[3] == 2);
        CHECK(r.original_to_reconstructed() == std::vector<std::size_t>{0, 1, 3, 4, 6, 7});
    }
    SUBCASE("adjacent spans") {
        const auto r = reconstruct(with_spans(2, {{0, 1, SpanKind::dep, "a"}, {1, 2, SpanKind::sdp, "b"}}));
        CHECK(r.tokens == std::vector<std::string>{"[DEP]", "t0", "[/DEP]", "[SDP]", "t1", "[/SDP]"});
    }
}

TEST_CASE("round trip and marker balance on random sentences") {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        std::vector<LinguisticSpan> spans;
        for (std::size_t i = 0; i < n; ++i) {
            if (gen() % 4 == 0) {
                const std::size_t len = 1 + gen() % 4;
                spans.push_back({i, std::min(n, i + len), gen() % 2 ? SpanKind::dep : SpanKind::sdp, "l"});
            }
        }
        const auto s = with_spans(n, spans);
        const auto r = reconstruct(s);
        REQUIRE(strip_markers(r.tokens) == s.tokens);
        REQUIRE(r.size() == n + 2 * s.spans.size());
        std::string open;
        for (const auto& t : r.tokens) {
            if (t == "[DEP]" || t == "[SDP]") {
                REQUIRE(open.empty());
                open = t;
            } else if (t == "[/DEP]" || t == "[/SDP]") {
                REQUIRE(open == (t == "[/DEP]" ? "[DEP]" : "[SDP]"));
                open.clear();
            }
        }
        REQUIRE(open.empty());
    }
}

TEST_CASE("round_half_up") {
    CHECK(round_half_up(2.5) == 3);
    CHECK(round_half_up(0.15 * 10) == 2);
    CHECK(round_half_up(0.6 * 3) == 2);
    CHECK(round_half_up(0.49) == 0);
}

TEST_CASE("plan_masks: 20-token reconstruction") {
    // 16 tokens + 2 spans -> 20 reconstructed positions
    const auto r = reconstruct(with_spans(16, {{2, 5, SpanKind::dep, "a"}, {9, 12, SpanKind::sdp, "b"}}));
    REQUIRE(r.size() == 20);
    const auto v = vocab_for(16);
    Rng rng(3);
    const auto plan = plan_masks(r, v, MaskOptions{}, rng);
    CHECK(plan.size() == 3);
    const auto ling = std::count_if(plan.positions.begin(), plan.positions.end(),
                                    [](const MaskedPosition& p) { return p.kind == MaskKind::linguistic; });
    CHECK(ling == 2);
    for (const auto& p : plan.positions) {
        if (p.kind != MaskKind::linguistic) continue;
        const bool inside = (p.index >= 2 && p.index < 7) || (p.index >= 11 && p.index < 16);
        CHECK(inside);
    }
}

TEST_CASE("plan_masks: backfill") {
    const auto v = vocab_for(30);
    SUBCASE("no spans -> all random") {
        const auto r = reconstruct(with_spans(20, {}));
        Rng rng(1);
        const auto plan = plan_masks(r, v, MaskOptions{}, rng);
        CHECK(plan.size() == 3);
        for (const auto& p : plan.positions) CHECK(p.kind == MaskKind::random);
    }
    SUBCASE("linguistic pool smaller than its share") {
        // 17 tokens + markers around an empty-interior? use a 1-token span:
        // pool = 3 positions; K = round(0.15*20) = 3, K_ling = 2 -> fits.
        // Force a pool of 1 by excluding two of its positions.
        const auto r = reconstruct(with_spans(18, {{4, 5, SpanKind::dep, "a"}}));
        REQUIRE(r.size() == 20);
        const std::vector<std::size_t> excluded = {4, 5};  // [DEP] and the token
        Rng rng(2);
        const auto plan = plan_masks(r, v, MaskOptions{}, rng, excluded);
        const auto ling = std::count_if(plan.positions.begin(), plan.positions.end(),
                                        [](const MaskedPosition& p) { return p.kind == MaskKind::linguistic; });
        CHECK(plan.size() == 3);
        CHECK(ling == 1);
        for (const auto& p : plan.positions) CHECK(std::find(excluded.begin(), excluded.end(), p.index) == excluded.end());
    }
    SUBCASE("random pool short -> linguistic backfills") {
        const auto r = reconstruct(with_spans(10, {{0, 9, SpanKind::dep, "a"}}));  // 12 positions, 1 outside
        MaskOptions mo;
        mo.mask_ratio = 0.5;  // K = 6, K_ling = 4, K_rand = 2 but only 1 random position
        Rng rng(5);
        const auto plan = plan_masks(r, v, mo, rng);
        CHECK(plan.size() == 6);
    }
}

TEST_CASE("plan_masks: count law, determinism, rejection") {
    const auto v = vocab_for(130);
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + gen() % 100;
        std::vector<LinguisticSpan> spans;
        for (std::size_t i = 0; i < n; i += 1 + gen() % 8) {
            if (gen() % 2) spans.push_back({i, std::min(n, i + 1 + gen() % 3), SpanKind::dep, "x"});
        }
        const auto r = reconstruct(with_spans(n, spans));
        Rng a(trial), b(trial);
        const auto pa = plan_masks(r, v, MaskOptions{}, a);
        const auto pb = plan_masks(r, v, MaskOptions{}, b);
        REQUIRE(pa.size() == oracle::mask_budget(r.size()));
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            REQUIRE(pa.positions[i].index == pb.positions[i].index);
            if (i) REQUIRE(pa.positions[i - 1].index < pa.positions[i].index);
        }
    }
    Rng rng(1);
    CHECK_THROWS_AS(plan_masks(reconstruct(with_spans(1, {})), v, MaskOptions{}, rng), SentenceRejected);
}

TEST_CASE("apply_masks") {
    const auto r = reconstruct(with_spans(6, {{2, 4, SpanKind::sdp, "non-agent"}}));
    const auto v = vocab_for(6);
    SUBCASE("empty plan") {
        const auto m = apply_masks(r, MaskPlan{}, v);
        CHECK(m.ids == v.encode(r.tokens));
        for (auto l : m.labels) CHECK(l == kIgnoreLabel);
    }
    SUBCASE("mask the opening marker") {
        MaskPlan plan;
        plan.positions.push_back({2, MaskKind::linguistic, v.id("[SDP]")});
        const auto m = apply_masks(r, plan, v);
        CHECK(m.ids[2] == kMaskId);
        CHECK(m.labels[2] == v.id("[SDP]"));
        CHECK(m.labels[3] == kIgnoreLabel);
    }
    SUBCASE("full coverage") {
        const auto r3 = reconstruct(with_spans(3, {}));
        MaskPlan plan;
        for (std::size_t i = 0; i < 3; ++i) plan.positions.push_back({i, MaskKind::random, v.id(r3.tokens[i])});
        const auto m = apply_masks(r3, plan, v);
        CHECK(m.ids == std::vector<TokenId>{kMaskId, kMaskId, kMaskId});
        for (std::size_t i = 0; i < 3; ++i) CHECK(m.labels[i] == v.id(r3.tokens[i]));
    }
    SUBCASE("out of range") {
        MaskPlan plan;
        plan.positions.push_back({8, MaskKind::random, kUnkId});
        CHECK_THROWS_AS(apply_masks(r, plan, v), ContractViolation);
    }
    SUBCASE("80/10/10 keeps labels at planned positions only") {
        const auto big = reconstruct(with_spans(100, {}));
        const auto vb = vocab_for(100);
        Rng rng(4);
        MaskOptions mo;
        mo.mask_ratio = 0.5;
        const auto plan = plan_masks(big, vb, mo, rng);
        const auto m = apply_masks(big, plan, vb, ReplacementPolicy::bert_80_10_10, &rng);
        std::size_t masked = 0, labelled = 0;
        for (std::size_t i = 0; i < m.ids.size(); ++i) {
            masked += m.ids[i] == kMaskId;
            labelled += m.labels[i] != kIgnoreLabel;
        }
        CHECK(labelled == plan.size());
        CHECK(masked < plan.size());
        CHECK(masked > plan.size() / 2);
    }
}
