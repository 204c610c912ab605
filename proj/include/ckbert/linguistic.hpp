#pragma once
// Linguistic-aware masking pipeline: annotate -> reconstruct -> plan -> apply.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ckbert/errors.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/vocab.hpp"

namespace ckbert {

enum class SpanKind { dep, sdp };

const char* to_string(SpanKind k) noexcept;
SpanKind span_kind_from_string(std::string_view s);

struct LinguisticSpan {
    std::size_t start = 0;  // inclusive token index
    std::size_t end = 0;    // exclusive
    SpanKind kind = SpanKind::dep;
    std::string label;

    friend bool operator==(const LinguisticSpan&, const LinguisticSpan&) = default;
};

struct AnnotatedSentence {
    std::vector<std::string> tokens;
    std::vector<LinguisticSpan> spans;  // sorted, pairwise disjoint
};

// Raised when a span provider returns a span that cannot be placed in the
// sentence at all.
class SpanError : public Error {
public:
    SpanError(LinguisticSpan span, std::size_t sentence_length);
    const LinguisticSpan& span() const noexcept { return span_; }

private:
    LinguisticSpan span_;
};

// Raised by plan_masks for sentences too short to mask.
class SentenceRejected : public Error {
public:
    using Error::Error;
};

class SpanProvider {
public:
    virtual ~SpanProvider() = default;
    // `line` is the 0-based corpus line the tokens came from.
    virtual std::vector<LinguisticSpan> spans_for(const std::vector<std::string>& tokens,
                                                  std::size_t line) const = 0;
};

class NullAnnotator final : public SpanProvider {
public:
    std::vector<LinguisticSpan> spans_for(const std::vector<std::string>&, std::size_t) const override {
        return {};
    }
};

// Lexicon lookup: greedy longest match of entry token sequences, scanning
// left to right.
class DictionaryAnnotator final : public SpanProvider {
public:
    struct Entry {
        std::vector<std::string> tokens;
        SpanKind kind = SpanKind::dep;
        std::string label;
    };

    DictionaryAnnotator() = default;
    explicit DictionaryAnnotator(std::vector<Entry> entries);

    // Lines of surface<TAB>DEP|SDP<TAB>label; the surface is tokenized.
    static DictionaryAnnotator load(std::istream& in);

    void add(Entry e);
    std::vector<LinguisticSpan> spans_for(const std::vector<std::string>& tokens,
                                          std::size_t line) const override;

private:
    std::map<std::string, std::vector<Entry>> by_first_;  // entries sorted longest first
};

// Precomputed spans, one JSON object per line:
//   {"line": <int>, "spans": [[start, end, "DEP"|"SDP", "label"], ...]}
// Lines without a record have no spans.
class SidecarAnnotator final : public SpanProvider {
public:
    static SidecarAnnotator load(std::istream& in);
    static SidecarAnnotator load_file(const std::string& path);

    std::vector<LinguisticSpan> spans_for(const std::vector<std::string>& tokens,
                                          std::size_t line) const override;
    std::size_t record_count() const noexcept { return by_line_.size(); }

private:
    std::map<std::size_t, std::vector<LinguisticSpan>> by_line_;
};

std::string sidecar_record(std::size_t line, const std::vector<LinguisticSpan>& spans);

// Keeps spans by leftmost start, then longest; drops any span overlapping
// one already kept. Output is sorted by start.
std::vector<LinguisticSpan> resolve_overlaps(std::vector<LinguisticSpan> spans);

// Spans running past the sentence end are clipped; spans that are empty or
// start beyond the end raise SpanError.
AnnotatedSentence annotate(std::vector<std::string> tokens, const SpanProvider& provider, std::size_t line = 0);

struct ReconstructedSentence {
    // Sentinel in origin for inserted marker tokens.
    static constexpr std::size_t kMarker = static_cast<std::size_t>(-1);

    std::vector<std::string> tokens;
    // Per span: [opening marker index, closing marker index + 1).
    std::vector<std::pair<std::size_t, std::size_t>> span_positions;
    std::vector<SpanKind> span_kinds;
    // Reconstructed index -> original index, or kMarker.
    std::vector<std::size_t> origin;

    std::size_t size() const noexcept { return tokens.size(); }
    // Original index -> reconstructed index.
    std::vector<std::size_t> original_to_reconstructed() const;
};

ReconstructedSentence reconstruct(const AnnotatedSentence& s);
std::vector<std::string> strip_markers(const std::vector<std::string>& tokens);

// floor(x + 1/2), tolerant of representation error at exact halves.
std::size_t round_half_up(double x);

enum class MaskKind { random, linguistic };

struct MaskedPosition {
    std::size_t index = 0;  // reconstructed index
    MaskKind kind = MaskKind::random;
    TokenId original = kUnkId;
};

struct MaskPlan {
    std::vector<MaskedPosition> positions;  // sorted by index, distinct
    std::size_t size() const noexcept { return positions.size(); }
};

struct MaskOptions {
    double mask_ratio = 0.15;
    double random_frac = 0.40;
};

// Budget K = max(1, round(mask_ratio * length)), of which
// round((1 - random_frac) * K) are drawn from the linguistic pool (span
// interiors plus their markers) and the rest from the other positions.
// A short pool is backfilled from the other one. `excluded` positions are
// never masked, and K is capped by the positions left.
MaskPlan plan_masks(const ReconstructedSentence& r, const Vocab& vocab, const MaskOptions& options, Rng& rng,
                    std::span<const std::size_t> excluded = {});

// Sentinel for positions that carry no MLM target.
inline constexpr TokenId kIgnoreLabel = -100;

enum class ReplacementPolicy {
    mask_only,     // every planned position becomes [MASK]
    bert_80_10_10  // 80% [MASK], 10% random token, 10% unchanged
};

struct MaskedSequence {
    std::vector<TokenId> ids;
    std::vector<TokenId> labels;
};

// `rng` is required for bert_80_10_10.
MaskedSequence apply_masks(const ReconstructedSentence& r, const MaskPlan& plan, const Vocab& vocab,
                           ReplacementPolicy policy = ReplacementPolicy::mask_only, Rng* rng = nullptr);

}  // namespace ckbert
