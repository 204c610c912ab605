#pragma once
// Pre-training loop: instance stream, batching, Adam, metrics log and
// checkpoint rotation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ckbert/config.hpp"
#include "ckbert/encoder.hpp"
#include "ckbert/kg.hpp"
#include "ckbert/linguistic.hpp"
#include "ckbert/objectives.hpp"
#include "ckbert/sample_builder.hpp"
#include "ckbert/vocab.hpp"

namespace ckbert {

struct MetricsRecord {
    std::uint64_t step = 0;
    double l_mlm = 0.0;
    double l_cl = 0.0;
    double l_total = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
    double instances_per_s = 0.0;
    std::size_t cmrm_active = 0;  // instances in the batch with a contrastive term
};

std::string metrics_to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const std::string& line);
std::vector<MetricsRecord> read_metrics(const std::string& path);

// Everything the instance builder needs, loaded once per run.
struct TrainingCorpus {
    std::vector<std::string> sentences;  // only sentences with >= 2 tokens
    std::vector<std::size_t> lines;      // their 0-based corpus line numbers
    KnowledgeGraph graph;
    Vocab vocab;
    std::unique_ptr<SpanProvider> annotator;
    std::unique_ptr<EntityLinker> linker;
};

// Throws DataError when the effective corpus is empty.
TrainingCorpus load_training_corpus(const TrainConfig& cfg);
TrainingCorpus make_training_corpus(const std::vector<std::string>& corpus_lines, KnowledgeGraph graph, Vocab vocab,
                                    std::unique_ptr<SpanProvider> annotator);

BuildConfig build_config(const TrainConfig& cfg);
LossOptions loss_options(const TrainConfig& cfg);
EncoderConfig model_config(const TrainConfig& cfg, const Vocab& vocab);

// Instance j of the stream uses sentence j mod n and its own seeded
// generator, so the stream is independent of how batches are split across
// worker threads.
TrainingInstance stream_instance(const TrainingCorpus& corpus, const BuildConfig& bc, std::uint64_t seed,
                                 std::uint64_t j);
std::vector<TrainingInstance> build_batch(const TrainingCorpus& corpus, const BuildConfig& bc, std::uint64_t seed,
                                          std::uint64_t step, std::size_t batch_size, std::size_t workers);

struct BatchResult {
    double l_mlm = 0.0;  // mean over the batch
    double l_cl = 0.0;   // mean over contrastive-active instances; 0 when none
    double l_total = 0.0;
    std::size_t cmrm_active = 0;
};

// Accumulates d(l_mlm + l_cl) into `grads` (which is zeroed first).
BatchResult batch_loss(const Parameters<float>& params, const std::vector<TrainingInstance>& batch,
                       const LossOptions& opts, Parameters<float>& grads);

struct TrainHooks {
    // Called before each step's forward pass; used by tests to inject faults.
    std::function<void(std::uint64_t step, Parameters<float>& params)> before_step;
    std::ostream* progress = nullptr;
    std::size_t progress_every = 10;
};

struct TrainResult {
    std::uint64_t first_step = 1;
    std::uint64_t last_step = 0;
    std::string final_checkpoint;
    std::string metrics_path;
    std::vector<MetricsRecord> records;  // this invocation only
};

// Writes <output_dir>/config.resolved, metrics.jsonl, step-NNNNNN.ckpt
// (rotated) and final.ckpt. A non-finite loss or gradient aborts with
// NumericError and leaves earlier checkpoints in place.
TrainResult pretrain(const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace ckbert
