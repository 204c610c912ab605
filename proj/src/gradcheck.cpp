#include "ckbert/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include "ckbert/errors.hpp"
#include "ckbert/fixture.hpp"
#include "ckbert/rng.hpp"
#include "ckbert/train.hpp"

namespace ckbert {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradProbe make_grad_probe(std::uint64_t seed) {
    FixtureSpec fs;
    fs.sentences = 24;
    fs.entities = 12;
    fs.relations = 4;
    fs.seed = seed;
    const auto fx = generate_fixture(fs);
    std::string annotations;
    for (const auto& l : fx.annotations) annotations += l + "\n";
    std::istringstream ann(annotations);
    std::string vocab_text;
    for (const auto& t : fx.vocab) vocab_text += t + "\n";
    std::istringstream vin(vocab_text);

    auto corpus = make_training_corpus(fx.corpus, fixture_graph(fx), Vocab::load(vin),
                                       std::make_unique<SidecarAnnotator>(SidecarAnnotator::load(ann)));
    TrainConfig tc;
    tc.max_seq_len = 32;
    const auto bc = build_config(tc);
    auto mc = model_config(tc, corpus.vocab);

    GradProbe probe;
    for (std::uint64_t j = 0;; ++j) {
        if (j > 1000) throw DataError("gradient probe: fixture yields no contrastive instance");
        auto inst = stream_instance(corpus, bc, seed, j);
        if (inst.cmrm_active && inst.masked_count() >= 2) {
            probe.instance = std::move(inst);
            break;
        }
    }
    // Move off the symmetric init point (unit gains, zero biases) so every
    // term of the backward pass is exercised.
    probe.params = Parameters<double>::init(mc, derive_seed(seed, 0x9C));
    Rng rng(derive_seed(seed, 0x9D));
    probe.params.for_each([&rng](const std::string&, Tensor<double>& t) {
        for (auto& v : t.values()) v += 0.05 * rng.normal();
    });
    return probe;
}

GradCheckReport check_gradients(const Parameters<double>& params, const TrainingInstance& inst,
                                const GradCheckOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report;
    auto grads = Parameters<double>::zeros(params.config);
    report.probe = instance_loss<double>(params, inst, opts.loss, &grads);

    Parameters<double> work = params;
    std::vector<const Tensor<double>*> g_list;
    grads.for_each([&g_list](const std::string&, const Tensor<double>& t) { g_list.push_back(&t); });
    std::size_t gi = 0;
    work.for_each([&](const std::string& name, Tensor<double>& t) {
        const auto& g = *g_list[gi++];
        GroupError ge;
        ge.name = name;
        const std::size_t n = t.size();
        const std::size_t stride = opts.max_per_group && n > opts.max_per_group ? n / opts.max_per_group : 1;
        for (std::size_t k = 0; k < n; k += stride) {
            const double saved = t[k];
            t[k] = saved + opts.step;
            const double up = instance_loss<double>(work, inst, opts.loss).l_total;
            t[k] = saved - opts.step;
            const double down = instance_loss<double>(work, inst, opts.loss).l_total;
            t[k] = saved;
            const double numeric = (up - down) / (2.0 * opts.step);
            ge.max_rel_error = std::max(ge.max_rel_error, relative_error(g[k], numeric, opts.floor));
            ge.max_abs_grad = std::max(ge.max_abs_grad, std::abs(g[k]));
            ++ge.checked;
        }
        if (ge.max_rel_error >= report.max_rel_error) {
            report.max_rel_error = ge.max_rel_error;
            report.worst_group = name;
        }
        report.groups.push_back(std::move(ge));
    });
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

GradCheckReport check_gradients(const GradCheckOptions& opts) {
    const auto probe = make_grad_probe(opts.seed);
    return check_gradients(probe.params, probe.instance, opts);
}

}  // namespace ckbert
