// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckbert/checkpoint.hpp"
#include "ckbert/encoder.hpp"
#include "ckbert/fixture.hpp"
#include "ckbert/gradcheck.hpp"
#include "ckbert/kg.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/objectives.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/train.hpp"
#include "oracles.hpp"

using namespace ckbert;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

class FixedSpans final : public SpanProvider {
public:
    explicit FixedSpans(std::vector<LinguisticSpan> s) : spans_(std::move(s)) {}
    std::vector<LinguisticSpan> spans_for(const std::vector<std::string>&, std::size_t) const override {
        return spans_;
    }

private:
    std::vector<LinguisticSpan> spans_;
};

// Random annotated sentence whose reconstruction has exactly `target` tokens.
AnnotatedSentence random_annotated(std::mt19937_64& gen, std::size_t target) {
    const std::size_t max_spans = std::min((target - 1) / 2, target / 3);
    const std::size_t spans = max_spans ? gen() % (max_spans + 1) : 0;
    const std::size_t n = target - 2 * spans;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(gen() % 50));
    std::vector<std::size_t> starts(n);
    for (std::size_t i = 0; i < n; ++i) starts[i] = i;
    std::shuffle(starts.begin(), starts.end(), gen);
    starts.resize(spans);
    std::sort(starts.begin(), starts.end());
    std::vector<LinguisticSpan> out;
    for (std::size_t k = 0; k < spans; ++k) {
        const std::size_t limit = k + 1 < spans ? starts[k + 1] : n;
        const std::size_t end = starts[k] + 1 + gen() % (limit - starts[k]);
        out.push_back({starts[k], end, gen() % 2 ? SpanKind::dep : SpanKind::sdp, "x"});
    }
    return annotate(std::move(tokens), FixedSpans(out));
}

Vocab word_vocab() {
    std::vector<std::string> words;
    for (int i = 0; i < 50; ++i) words.push_back("w" + std::to_string(i));
    return Vocab::with_reserved(words);
}

// --- criteria ----------------------------------------------------------------

Outcome hop_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(101);
    std::size_t pairs = 0, mismatches = 0;
    for (int g_i = 0; g_i < 50; ++g_i) {
        const std::size_t entities = 20 + gen() % 181;
        const std::size_t triples = 1 + gen() % 600;
        const auto g = oracle::random_graph(gen, entities, triples, 8);
        const auto n = g.entity_count();
        for (std::uint32_t a = 0; a < n; ++a) {
            const auto ref = oracle::naive_bfs(n, g.triples(), a);
            for (std::uint32_t b = 0; b < n; ++b) {
                const auto h = g.hop_distance(EntityId{a}, EntityId{b});
                const bool ok = ref[b] == oracle::kInf ? !h.reachable()
                                                       : h.reachable() && h.value() == static_cast<std::uint32_t>(ref[b]);
                mismatches += !ok;
                ++pairs;
            }
        }
    }
    const double s = seconds_since(t0);
    return {mismatches == 0 && s < 30.0,
            fmt("50 graphs, %zu pairs, %zu mismatches, %.1f s (limit 30 s)", pairs, mismatches, s)};
}

Outcome negative_soundness() {
    std::mt19937_64 gen(202);
    std::size_t draws = 0, violations = 0, triples_checked = 0;
    while (draws < 1000) {
        const auto g = oracle::random_graph(gen, 30 + gen() % 120, 40 + gen() % 200, 6);
        const auto d = oracle::all_pairs(g.entity_count(), g.triples());
        for (int k = 0; k < 50 && draws < 1000; ++k) {
            const auto e = static_cast<std::uint32_t>(gen() % g.entity_count());
            Rng rng(derive_seed(202, draws, k));
            const auto negs = g.sample_negatives(EntityId{e}, 3, 3, rng);
            if (!negs) continue;
            ++draws;
            const auto pos = g.candidate_positives(EntityId{e});
            for (const auto& t : *negs) {
                ++triples_checked;
                const int far = oracle::d_far(d, e, t);
                const bool in_pos = std::find(pos.begin(), pos.end(), t) != pos.end();
                violations += far < 2 || far > 3 || in_pos || oracle::incident(e, t);
            }
        }
    }
    return {violations == 0,
            fmt("%zu draws, %zu negatives checked, %zu violations", draws, triples_checked, violations)};
}

Outcome path_check() {
    KnowledgeGraph::Builder b;
    b.add("e0", "r", "e2").add("e2", "r", "e6").add("e6", "r", "e9");
    const auto g = std::move(b).build();
    const auto h = g.hop_distance(*g.find_entity("e0"), *g.find_entity("e9"));
    return {h.reachable() && h.value() == 3, fmt("hop(e0, e9) = %d", h.reachable() ? static_cast<int>(h.value()) : -1)};
}

Outcome mask_budget() {
    std::mt19937_64 gen(303);
    const auto vocab = word_vocab();
    std::size_t count_fail = 0, split_checked = 0, split_fail = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::size_t len = 2 + gen() % 127;
        const auto r = reconstruct(random_annotated(gen, len));
        Rng rng(derive_seed(303, i));
        const auto plan = plan_masks(r, vocab, MaskOptions{}, rng);
        const auto K = oracle::mask_budget(r.size());
        count_fail += plan.size() != K;

        std::size_t pool = 0;
        for (const auto& [open, close] : r.span_positions) pool += close - open;
        const auto k_ling = oracle::linguistic_share(K);
        if (pool >= k_ling && r.size() - pool >= K - k_ling) {
            ++split_checked;
            std::size_t ling = 0;
            for (const auto& p : plan.positions) ling += p.kind == MaskKind::linguistic;
            split_fail += ling != k_ling;
        }
    }
    return {count_fail == 0 && split_fail == 0,
            fmt("10000 plans: %zu budget mismatches; %zu with both pools sufficient, %zu split mismatches",
                count_fail, split_checked, split_fail)};
}

Outcome marker_round_trip() {
    std::mt19937_64 gen(404);
    std::size_t failures = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto s = random_annotated(gen, 2 + gen() % 127);
        const auto r = reconstruct(s);
        bool ok = strip_markers(r.tokens) == s.tokens;
        std::string open;
        for (const auto& t : r.tokens) {
            if (t == "[DEP]" || t == "[SDP]") {
                ok = ok && open.empty();
                open = t;
            } else if (t == "[/DEP]" || t == "[/SDP]") {
                ok = ok && open == (t == "[/DEP]" ? "[DEP]" : "[SDP]");
                open.clear();
            }
        }
        ok = ok && open.empty();
        failures += !ok;
    }
    return {failures == 0, fmt("10000 sentences, %zu failures", failures)};
}

Outcome analytic_losses() {
    double worst = 0;
    for (std::size_t V : {10u, 99u, 30522u}) {
        Tensor<double> logits(4, V, 0.25);
        const std::vector<TokenId> labels = {0, 1, 2, static_cast<TokenId>(V - 1)};
        worst = std::max(worst, std::abs(lmlm_loss<double>(logits, labels) - std::log(static_cast<double>(V))));
    }
    const std::vector<double> h = {0.2, -0.4, 0.9, 1.3};
    const double cl = cmrm_loss<double>(h, h, {h, h, h}, 0.5, false);
    const double cl_err = std::abs(cl - std::log(3.0));
    return {worst < 1e-6 && cl_err < 1e-6,
            fmt("uniform-logit LMLM max |err| %.1e; equal-cosine CMRM %.6f (ln 3 = %.6f)", worst, cl, std::log(3.0))};
}

Outcome gradient_check() {
    GradCheckOptions opts;  // every coordinate of every group
    const auto rep = check_gradients(opts);
    return {rep.max_rel_error < 1e-4 && rep.seconds < 300.0,
            fmt("%zu groups, max relative error %.2e (%s), %.1f s (limit 300 s)", rep.groups.size(),
                rep.max_rel_error, rep.worst_group.c_str(), rep.seconds)};
}

struct SmokeRun {
    TrainConfig cfg;
    std::vector<MetricsRecord> records;
    double seconds = 0;
    std::size_t vocab = 0;
};

SmokeRun smoke_run(const fs::path& root, const std::string& name) {
    const auto data = root / "data";
    if (!fs::exists(data / "corpus.txt")) write_fixture(generate_fixture(FixtureSpec{}), data.string());
    SmokeRun run;
    auto& c = run.cfg;  // defaults: tiny preset, lr 5e-5, batch 20, max length 128
    c.corpus = (data / "corpus.txt").string();
    c.annotations = (data / "annotations.jsonl").string();
    c.kg = (data / "kg.tsv").string();
    c.vocab = (data / "vocab.txt").string();
    c.steps = 200;
    c.output_dir = (root / name).string();
    fs::remove_all(c.output_dir);
    const auto t0 = Clock::now();
    pretrain(c);
    run.seconds = seconds_since(t0);
    run.records = read_metrics((fs::path(c.output_dir) / "metrics.jsonl").string());
    run.vocab = Vocab::load_file(c.vocab).size();
    return run;
}

double window_mean(const std::vector<MetricsRecord>& r, std::size_t from, std::size_t to,
                   double MetricsRecord::*field) {
    double s = 0;
    for (std::size_t i = from - 1; i < to; ++i) s += r[i].*field;
    return s / static_cast<double>(to - from + 1);
}

Outcome training_smoke(const SmokeRun& run) {
    if (run.records.size() != 200) return {false, fmt("expected 200 metrics records, got %zu", run.records.size())};
    const double lnv = std::log(static_cast<double>(run.vocab));
    const double first = run.records[0].l_mlm;
    const double early = window_mean(run.records, 1, 20, &MetricsRecord::l_mlm);
    const double late = window_mean(run.records, 181, 200, &MetricsRecord::l_mlm);
    const double cl_early = window_mean(run.records, 1, 20, &MetricsRecord::l_cl);
    const double cl_late = window_mean(run.records, 181, 200, &MetricsRecord::l_cl);
    const double drop = 1.0 - late / early;
    const bool start_ok = std::abs(first - lnv) / lnv <= 0.10;
    const bool drop_ok = drop >= 0.30;
    const bool cl_ok = cl_late < cl_early;
    return {start_ok && drop_ok && cl_ok && run.seconds < 600.0,
            fmt("step-1 l_mlm %.4f vs ln V %.4f [%s]; l_mlm mean 1-20 %.4f -> 181-200 %.4f, drop %.1f%% "
                "(need >= 30%%) [%s]; l_cl %.4f -> %.4f [%s]; %.1f s",
                first, lnv, start_ok ? "ok" : "fail", early, late, 100.0 * drop, drop_ok ? "ok" : "fail", cl_early,
                cl_late, cl_ok ? "ok" : "fail", run.seconds)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Metrics lines with the wall-clock fields removed.
std::vector<std::string> deterministic_metrics(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        auto j = nlohmann::ordered_json::parse(line);
        j.erase("wall_ms");
        j.erase("instances_per_s");
        out.push_back(j.dump());
    }
    return out;
}

Outcome determinism(const SmokeRun& a, const SmokeRun& b) {
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(a.cfg.output_dir)) {
        if (entry.path().extension() != ".ckpt") continue;
        ++files;
        const auto other = fs::path(b.cfg.output_dir) / entry.path().filename();
        differing += !fs::exists(other) || slurp(entry.path()) != slurp(other);
    }
    const bool metrics_same = deterministic_metrics(fs::path(a.cfg.output_dir) / "metrics.jsonl") ==
                              deterministic_metrics(fs::path(b.cfg.output_dir) / "metrics.jsonl");
    return {files > 0 && differing == 0 && metrics_same,
            fmt("%zu checkpoint files compared, %zu differ; metrics logs %s (wall-clock fields excluded)", files,
                differing, metrics_same ? "identical" : "differ")};
}

Outcome parameter_count_check() {
    const auto n = static_cast<double>(parameter_count(encoder_preset("base")));
    const double rel = std::abs(n - 110e6) / 110e6;
    return {rel <= 0.05, fmt("base preset %.2fM parameters, %.2f%% from 110M", n / 1e6, 100.0 * rel)};
}

}  // namespace

int main() {
    const auto root = fs::temp_directory_path() / "ckbert_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    int failures = 0;
    auto report = [&failures](int id, const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "hop oracle equivalence", hop_oracle);
    report(2, "negative-sampling soundness", negative_soundness);
    report(3, "three-hop path check", path_check);
    report(4, "mask-budget law", mask_budget);
    report(5, "marker round trip", marker_round_trip);
    report(6, "analytic loss values", analytic_losses);
    report(7, "gradient check", gradient_check);

    SmokeRun first, second;
    report(8, "training smoke", [&] {
        first = smoke_run(root, "run_a");
        return training_smoke(first);
    });
    report(9, "determinism", [&] {
        if (first.records.empty()) first = smoke_run(root, "run_a");
        second = smoke_run(root, "run_b");
        return determinism(first, second);
    });
    report(10, "base parameter count", parameter_count_check);

    std::printf("%d of 10 criteria passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
