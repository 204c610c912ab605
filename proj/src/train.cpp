#include "ckbert/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "ckbert/checkpoint.hpp"
#include "ckbert/errors.hpp"
#include "ckbert/optimizer.hpp"
#include "ckbert/rng.hpp"

namespace ckbert {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitTag = 0x1A17;
constexpr std::uint64_t kInstanceTag = 0x1A57;

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

std::string checkpoint_name(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step-%06llu.ckpt", static_cast<unsigned long long>(step));
    return buf;
}

bool all_finite(const Parameters<float>& p) {
    bool ok = true;
    p.for_each([&ok](const std::string&, const Tensor<float>& t) {
        if (!ok) return;
        for (float v : t.values()) {
            if (!std::isfinite(v)) {
                ok = false;
                return;
            }
        }
    });
    return ok;
}

void zero(Parameters<float>& p) {
    p.for_each([](const std::string&, Tensor<float>& t) { t.fill(0.0f); });
}

}  // namespace

std::string metrics_to_json(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["l_mlm"] = r.l_mlm;
    j["l_cl"] = r.l_cl;
    j["l_total"] = r.l_total;
    j["lr"] = r.lr;
    j["cmrm_active"] = r.cmrm_active;
    j["wall_ms"] = r.wall_ms;
    j["instances_per_s"] = r.instances_per_s;
    return j.dump();
}

MetricsRecord metrics_from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        MetricsRecord r;
        r.step = j.at("step").get<std::uint64_t>();
        r.l_mlm = j.at("l_mlm").get<double>();
        r.l_cl = j.at("l_cl").get<double>();
        r.l_total = j.at("l_total").get<double>();
        r.lr = j.at("lr").get<double>();
        r.cmrm_active = j.value("cmrm_active", std::size_t{0});
        r.wall_ms = j.at("wall_ms").get<double>();
        r.instances_per_s = j.at("instances_per_s").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed metrics record: ") + e.what());
    }
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
    std::vector<MetricsRecord> out;
    for (const auto& line : read_lines(path)) {
        if (!line.empty()) out.push_back(metrics_from_json(line));
    }
    return out;
}

TrainingCorpus make_training_corpus(const std::vector<std::string>& corpus_lines, KnowledgeGraph graph, Vocab vocab,
                                    std::unique_ptr<SpanProvider> annotator) {
    TrainingCorpus c;
    for (std::size_t i = 0; i < corpus_lines.size(); ++i) {
        if (tokenize(corpus_lines[i]).size() < 2) continue;
        c.sentences.push_back(corpus_lines[i]);
        c.lines.push_back(i);
    }
    if (c.sentences.empty()) throw DataError("effective corpus is empty (no sentence has at least two tokens)");
    c.graph = std::move(graph);
    c.vocab = std::move(vocab);
    c.annotator = annotator ? std::move(annotator) : std::make_unique<NullAnnotator>();
    c.linker = std::make_unique<EntityLinker>(c.graph);
    return c;
}

TrainingCorpus load_training_corpus(const TrainConfig& cfg) {
    if (cfg.corpus.empty()) throw ConfigError("corpus path is required");
    if (cfg.kg.empty()) throw ConfigError("kg path is required");
    if (cfg.vocab.empty()) throw ConfigError("vocab path is required");
    std::unique_ptr<SpanProvider> annotator;
    if (!cfg.annotations.empty()) {
        annotator = std::make_unique<SidecarAnnotator>(SidecarAnnotator::load_file(cfg.annotations));
    }
    return make_training_corpus(read_lines(cfg.corpus), load_kg_file(cfg.kg), Vocab::load_file(cfg.vocab),
                                std::move(annotator));
}

BuildConfig build_config(const TrainConfig& cfg) {
    BuildConfig bc;
    bc.mask.mask_ratio = cfg.mask_ratio;
    bc.mask.random_frac = cfg.random_frac;
    bc.replacement = cfg.bert_style_replacement ? ReplacementPolicy::bert_80_10_10 : ReplacementPolicy::mask_only;
    bc.negatives = cfg.negatives;
    bc.delta = cfg.delta;
    bc.max_seq_len = cfg.max_seq_len;
    bc.validate();
    return bc;
}

LossOptions loss_options(const TrainConfig& cfg) {
    LossOptions o;
    o.tau = cfg.tau;
    o.include_positive_in_denominator = cfg.include_pos_in_denom;
    o.triple_pooling = cfg.triple_pooling == "mean" ? TriplePooling::mean : TriplePooling::cls;
    return o;
}

EncoderConfig model_config(const TrainConfig& cfg, const Vocab& vocab) {
    auto mc = encoder_preset(cfg.preset);
    if (mc.vocab_size == 0) {
        mc.vocab_size = vocab.size();
    } else if (vocab.size() > mc.vocab_size) {
        throw ConfigError("vocabulary has " + std::to_string(vocab.size()) + " entries but preset " + cfg.preset +
                          " allows " + std::to_string(mc.vocab_size));
    }
    if (cfg.max_seq_len > mc.max_len) {
        throw ConfigError("max_seq_len must be <= " + std::to_string(mc.max_len) + " for preset " + cfg.preset);
    }
    mc.validate();
    return mc;
}

TrainingInstance stream_instance(const TrainingCorpus& corpus, const BuildConfig& bc, std::uint64_t seed,
                                 std::uint64_t j) {
    const std::size_t s = static_cast<std::size_t>(j % corpus.sentences.size());
    Rng rng(derive_seed(seed, kInstanceTag, j));
    auto inst = build_instance(corpus.sentences[s], corpus.lines[s], *corpus.annotator, corpus.graph,
                               *corpus.linker, corpus.vocab, bc, rng);
    if (!inst) throw DataError("corpus line " + std::to_string(corpus.lines[s]) + " yields no instance");
    return std::move(*inst);
}

std::vector<TrainingInstance> build_batch(const TrainingCorpus& corpus, const BuildConfig& bc, std::uint64_t seed,
                                          std::uint64_t step, std::size_t batch_size, std::size_t workers) {
    std::vector<TrainingInstance> batch(batch_size);
    const std::uint64_t base = (step - 1) * batch_size;
    workers = std::clamp<std::size_t>(workers, 1, batch_size);
    if (workers == 1) {
        for (std::size_t b = 0; b < batch_size; ++b) batch[b] = stream_instance(corpus, bc, seed, base + b);
        return batch;
    }
    // Each worker fills a strided set of slots; slot order is the stream order.
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t b = w; b < batch_size; b += workers) {
                    batch[b] = stream_instance(corpus, bc, seed, base + b);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return batch;
}

BatchResult batch_loss(const Parameters<float>& params, const std::vector<TrainingInstance>& batch,
                       const LossOptions& opts, Parameters<float>& grads) {
    if (batch.empty()) throw ContractViolation("batch_loss: empty batch");
    zero(grads);
    BatchResult r;
    for (const auto& inst : batch) r.cmrm_active += inst.cmrm_active ? 1 : 0;
    const float w_mlm = 1.0f / static_cast<float>(batch.size());
    const float w_cl = r.cmrm_active ? 1.0f / static_cast<float>(r.cmrm_active) : 0.0f;
    double sum_mlm = 0.0, sum_cl = 0.0;
    for (const auto& inst : batch) {
        const auto rep = instance_loss<float>(params, inst, opts, &grads, w_mlm, inst.cmrm_active ? w_cl : 0.0f);
        sum_mlm += rep.l_mlm;
        sum_cl += rep.l_cl;
    }
    r.l_mlm = sum_mlm / static_cast<double>(batch.size());
    r.l_cl = r.cmrm_active ? sum_cl / static_cast<double>(r.cmrm_active) : 0.0;
    r.l_total = total_loss(r.l_mlm, r.l_cl);
    return r;
}

TrainResult pretrain(const TrainConfig& cfg, const TrainHooks& hooks) {
    validate(cfg);
    const auto corpus = load_training_corpus(cfg);
    const auto bc = build_config(cfg);
    const auto lo = loss_options(cfg);
    const auto mc = model_config(cfg, corpus.vocab);
    const AdamOptions adam_opt{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    {
        std::ofstream out(dir / "config.resolved", std::ios::binary | std::ios::trunc);
        out << render_config(cfg);
    }

    TrainResult result;
    result.metrics_path = (dir / "metrics.jsonl").string();

    Parameters<float> params;
    AdamState<float> adam;
    std::uint64_t start = 0;
    std::vector<std::string> kept_metrics;
    if (!cfg.resume.empty()) {
        auto ck = load_checkpoint(cfg.resume);
        if (ck.params.config != mc) throw ConfigError("resume checkpoint was written for a different encoder config");
        if (!ck.adam) throw DataError("resume checkpoint carries no optimizer state: " + cfg.resume);
        params = std::move(ck.params);
        adam = std::move(*ck.adam);
        start = ck.step;
        if (fs::exists(result.metrics_path)) {
            for (auto& line : read_lines(result.metrics_path)) {
                if (!line.empty() && metrics_from_json(line).step <= start) kept_metrics.push_back(std::move(line));
            }
        }
    } else {
        params = Parameters<float>::init(mc, derive_seed(cfg.seed, kInitTag));
        adam = AdamState<float>::zeros(mc);
    }
    if (start > cfg.steps) throw ConfigError("resume checkpoint is past the configured step count");

    {
        std::ofstream out(result.metrics_path, std::ios::binary | std::ios::trunc);
        for (const auto& l : kept_metrics) out << l << '\n';
    }
    std::ofstream metrics(result.metrics_path, std::ios::binary | std::ios::app);
    if (!metrics) throw DataError("cannot write " + result.metrics_path);

    const std::map<std::string, std::string> meta = {{"seed", std::to_string(cfg.seed)}, {"preset", cfg.preset}};
    std::vector<std::uint64_t> rotation;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        unsigned long long s = 0;
        if (std::sscanf(name.c_str(), "step-%llu.ckpt", &s) == 1 && s <= start) rotation.push_back(s);
    }
    std::sort(rotation.begin(), rotation.end());

    auto grads = Parameters<float>::zeros(mc);
    result.first_step = start + 1;
    for (std::uint64_t step = start + 1; step <= cfg.steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        if (hooks.before_step) hooks.before_step(step, params);
        const auto batch = build_batch(corpus, bc, cfg.seed, step, cfg.batch_size, cfg.workers);
        BatchResult br;
        try {
            br = batch_loss(params, batch, lo, grads);
        } catch (const NumericError& e) {
            throw NumericError("non-finite loss at step " + std::to_string(step) + "; last good checkpoint kept");
        }
        if (!all_finite(grads)) {
            throw NumericError("non-finite gradient at step " + std::to_string(step) + "; last good checkpoint kept");
        }
        adam_step(params, grads, adam, adam_opt);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        MetricsRecord rec{step, br.l_mlm, br.l_cl, br.l_total, cfg.lr, ms,
                          ms > 0 ? 1000.0 * static_cast<double>(cfg.batch_size) / ms : 0.0, br.cmrm_active};
        metrics << metrics_to_json(rec) << '\n' << std::flush;
        result.records.push_back(rec);
        result.last_step = step;

        if (hooks.progress && (step % hooks.progress_every == 0 || step == cfg.steps)) {
            *hooks.progress << "step " << step << " l_mlm " << br.l_mlm << " l_cl " << br.l_cl << " l_total "
                            << br.l_total << '\n';
        }
        if (step % cfg.checkpoint_every == 0) {
            save_checkpoint((dir / checkpoint_name(step)).string(), params, &adam, step, meta);
            rotation.push_back(step);
            while (rotation.size() > cfg.keep_checkpoints) {
                fs::remove(dir / checkpoint_name(rotation.front()));
                rotation.erase(rotation.begin());
            }
        }
    }
    result.final_checkpoint = (dir / "final.ckpt").string();
    save_checkpoint(result.final_checkpoint, params, &adam, std::max(start, result.last_step), meta);
    return result;
}

}  // namespace ckbert
