#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quesco/augment.hpp"
#include "quesco/corpus.hpp"
#include "quesco/loss.hpp"
#include "quesco/model.hpp"

namespace quesco {
namespace trainer {

struct TrainConfig {
    int batch_size = 64;
    int steps = 2000;
    double lr = 1e-3;             // desk-scale default; paper value is 5e-5
    double weight_decay = 0.01;
    double momentum = 0.999;
    std::size_t bank_capacity = 1600;
    loss::Temperatures temperatures = loss::Temperatures::paper_default();
    augment::AugmentConfig aug;
    model::EncoderConfig encoder;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;     // 0: final checkpoint only
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate(std::size_t corpus_size) const;
};

// Decoupled weight decay adaptive-moment optimizer over an EncoderParams
// mirror.
struct AdamW {
    model::EncoderParams m, v;
    long t = 0;

    static AdamW zeros_like(const model::EncoderParams& p);
    void step(model::EncoderParams& params, const model::EncoderGrads& grads, const TrainConfig& cfg);
};

struct TrainState {
    long step = 0;
    model::EncoderParams query;
    model::EncoderParams key;
    model::Vocab vocab;
    AdamW opt;
    model::MemoryBank bank;

    TrainState(model::EncoderParams q, model::EncoderParams k, model::Vocab v, std::size_t bank_capacity)
        : query(std::move(q)), key(std::move(k)), vocab(std::move(v)),
          opt(AdamW::zeros_like(query)), bank(bank_capacity, query.cfg.d_proj) {}
};

TrainState init_state(const std::vector<Question>& corpus, const TrainConfig& cfg);

struct StepReport {
    double mean_loss = 0.0;
    std::vector<double> per_rank_mean;  // over anchors where the rank was active
    std::vector<int> skipped_counts;    // anchors that skipped each rank
};

StepReport pretrain_step(TrainState& state, const std::vector<Question>& batch, const TrainConfig& cfg);

// Deterministic batch schedule: epochs are seeded shuffles of the corpus,
// split into floor(N/B) full batches.
std::vector<Question> batch_for_step(const std::vector<Question>& corpus, const TrainConfig& cfg, long step);

struct RunResult {
    std::vector<StepReport> history;
};

// Runs cfg.steps steps, appending one JSONL record per step to
// <out_dir>/metrics.jsonl and writing <out_dir>/checkpoint.json (encoder +
// vocab) and <out_dir>/state.json (full resumable state) at the end.
RunResult run_pretraining(const std::vector<Question>& corpus, const KnowledgeHierarchy& hierarchy,
                          const TrainConfig& cfg, const std::string& out_dir);

void save_state(const TrainState& state, const std::string& path);
TrainState load_state(const std::string& path);

}  // namespace trainer
}  // namespace quesco
