#include "quesco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "quesco/khar.hpp"

using nlohmann::json;

namespace quesco {
namespace trainer {

using model::EncoderGrads;
using model::EncoderParams;
using model::MatrixXd;
using model::VectorXd;

void TrainConfig::validate(std::size_t corpus_size) const {
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (bank_capacity < static_cast<std::size_t>(batch_size))
        throw ValidationError("bank capacity must be >= batch size");
    if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
    if (weight_decay < 0.0) throw ValidationError("weight decay must be >= 0");
    if (momentum < 0.0 || momentum > 1.0) throw ValidationError("momentum must be in [0,1]");
    temperatures.validate();
    aug.validate();
    if (corpus_size < static_cast<std::size_t>(batch_size))
        throw ValidationError("corpus smaller than one batch");
}

AdamW AdamW::zeros_like(const EncoderParams& p) {
    AdamW a;
    a.m = p;
    a.v = p;
    a.m.for_each_tensor([](const std::string&, MatrixXd& t) { t.setZero(); });
    a.v.for_each_tensor([](const std::string&, MatrixXd& t) { t.setZero(); });
    return a;
}

void AdamW::step(EncoderParams& params, const EncoderGrads& grads, const TrainConfig& cfg) {
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));

    std::vector<const MatrixXd*> gs;
    grads.store.for_each_tensor([&](const std::string&, const MatrixXd& g) { gs.push_back(&g); });
    std::vector<MatrixXd*> ms, vs;
    m.for_each_tensor([&](const std::string&, MatrixXd& x) { ms.push_back(&x); });
    v.for_each_tensor([&](const std::string&, MatrixXd& x) { vs.push_back(&x); });

    std::size_t i = 0;
    params.for_each_tensor([&](const std::string&, MatrixXd& theta) {
        const MatrixXd& g = *gs[i];
        MatrixXd& mm = *ms[i];
        MatrixXd& vv = *vs[i];
        mm = cfg.adam_beta1 * mm + (1.0 - cfg.adam_beta1) * g;
        vv = cfg.adam_beta2 * vv + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
        MatrixXd mhat = mm / bc1;
        MatrixXd vhat = vv / bc2;
        // decoupled decay: applied to the parameter, not the moments
        theta -= cfg.lr * (mhat.array() / (vhat.array().sqrt() + cfg.adam_eps)).matrix();
        theta -= cfg.lr * cfg.weight_decay * theta;
        ++i;
    });
}

TrainState init_state(const std::vector<Question>& corpus, const TrainConfig& cfg) {
    cfg.validate(corpus.size());
    model::Vocab vocab = model::build_vocab(corpus);
    Rng rng = Rng(cfg.seed).split("init");
    EncoderParams query = EncoderParams::init(cfg.encoder, vocab.size(), rng);
    EncoderParams key = query;  // momentum twin starts as an exact copy
    return TrainState(std::move(query), std::move(key), std::move(vocab), cfg.bank_capacity);
}

std::vector<Question> batch_for_step(const std::vector<Question>& corpus, const TrainConfig& cfg, long step) {
    const long batches_per_epoch = static_cast<long>(corpus.size()) / cfg.batch_size;
    const long epoch = step / batches_per_epoch;
    const long offset = (step % batches_per_epoch) * cfg.batch_size;

    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng(cfg.seed).split("epoch").split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.next_below(i + 1)]);

    std::vector<Question> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int i = 0; i < cfg.batch_size; ++i)
        batch.push_back(corpus[order[static_cast<std::size_t>(offset + i)]]);
    return batch;
}

StepReport pretrain_step(TrainState& state, const std::vector<Question>& batch, const TrainConfig& cfg) {
    const int levels = static_cast<int>(cfg.temperatures.tau.size()) - 2;
    EncoderGrads grads = EncoderGrads::zeros_like(state.query);

    StepReport report;
    report.per_rank_mean.assign(static_cast<std::size_t>(levels) + 1, 0.0);
    report.skipped_counts.assign(static_cast<std::size_t>(levels) + 1, 0);
    std::vector<int> active_counts(static_cast<std::size_t>(levels) + 1, 0);

    const auto bank_entries = state.bank.snapshot();
    std::vector<khar::Candidate> candidates;
    candidates.reserve(bank_entries.size());
    for (const auto& e : bank_entries) candidates.push_back({e.source_id, e.path});

    std::vector<model::BankEntry> new_entries;
    new_entries.reserve(batch.size());

    for (const auto& anchor : batch) {
        Rng arng = Rng(cfg.seed).split("aug").split(static_cast<std::uint64_t>(state.step)).split(anchor.id);
        augment::AugmentedQuestion view = augment::augment(anchor, cfg.aug, arng);

        model::Encoded aug_key = model::encode(view.question, state.key, state.vocab);
        model::ForwardCache cache;
        model::Encoded q = model::encode(anchor, state.query, state.vocab, &cache);

        khar::RankPartition part = khar::partition(anchor.id, anchor.concepts, true, candidates, levels);

        std::vector<std::vector<double>> sims(part.sets.size());
        sims[0].push_back(q.key.dot(aug_key.key));
        for (std::size_t u = 1; u < part.sets.size(); ++u)
            for (const auto& ref : part.sets[u])
                sims[u].push_back(q.key.dot(bank_entries[ref.index].key));

        std::vector<std::vector<double>> sim_grads;
        loss::LossReport lr = loss::rince(sims, cfg.temperatures, &sim_grads);

        VectorXd dkey = sim_grads[0][0] * aug_key.key;
        for (std::size_t u = 1; u < part.sets.size(); ++u)
            for (std::size_t p = 0; p < part.sets[u].size(); ++p)
                dkey += sim_grads[u][p] * bank_entries[part.sets[u][p].index].key;

        model::encode_backward(state.query, cache, dkey, grads);

        report.mean_loss += lr.total;
        for (int i = 0; i <= levels; ++i) {
            if (std::find(lr.skipped_ranks.begin(), lr.skipped_ranks.end(), i) != lr.skipped_ranks.end()) {
                ++report.skipped_counts[static_cast<std::size_t>(i)];
            } else {
                report.per_rank_mean[static_cast<std::size_t>(i)] += lr.per_rank[static_cast<std::size_t>(i)];
                ++active_counts[static_cast<std::size_t>(i)];
            }
        }

        new_entries.push_back({aug_key.key, anchor.concepts, anchor.id});
    }

    report.mean_loss /= static_cast<double>(batch.size());
    for (int i = 0; i <= levels; ++i)
        if (active_counts[static_cast<std::size_t>(i)] > 0)
            report.per_rank_mean[static_cast<std::size_t>(i)] /= active_counts[static_cast<std::size_t>(i)];

    if (!std::isfinite(report.mean_loss)) throw ValidationError("non-finite training loss");

    grads.scale(1.0 / static_cast<double>(batch.size()));
    state.opt.step(state.query, grads, cfg);
    model::momentum_update(state.query, state.key, cfg.momentum);
    state.bank.enqueue(new_entries);
    ++state.step;
    return report;
}

namespace {

json matrix_to_json(const MatrixXd& m) {
    std::vector<double> flat(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            flat[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

MatrixXd matrix_from_json(const json& j) {
    Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    MatrixXd m(rows, cols);
    const auto& data = j.at("data");
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index jj = 0; jj < cols; ++jj)
            m(i, jj) = data.at(static_cast<std::size_t>(i * cols + jj)).get<double>();
    return m;
}

json params_to_json(const EncoderParams& p) {
    json tensors = json::object();
    p.for_each_tensor([&](const std::string& name, const MatrixXd& m) { tensors[name] = matrix_to_json(m); });
    return tensors;
}

void params_from_json(const json& tensors, EncoderParams& p) {
    p.for_each_tensor([&](const std::string& name, MatrixXd& m) { m = matrix_from_json(tensors.at(name)); });
}

json config_to_json(const model::EncoderConfig& c) {
    return {{"d_e", c.d_e},   {"n_blocks", c.n_blocks},       {"d_ff", c.d_ff},
            {"d_h", c.d_h},   {"d_proj", c.d_proj},           {"normalize_keys", c.normalize_keys}};
}

model::EncoderConfig config_from_json(const json& j) {
    model::EncoderConfig c;
    c.d_e = j.at("d_e").get<int>();
    c.n_blocks = j.at("n_blocks").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.d_h = j.at("d_h").get<int>();
    c.d_proj = j.at("d_proj").get<int>();
    c.normalize_keys = j.at("normalize_keys").get<bool>();
    return c;
}

}  // namespace

void save_state(const TrainState& state, const std::string& path) {
    json j;
    j["format"] = "quesco-train-state-v1";
    j["step"] = state.step;
    j["config"] = config_to_json(state.query.cfg);
    j["vocab"] = state.vocab.id_to_token;
    j["query"] = params_to_json(state.query);
    j["key"] = params_to_json(state.key);
    j["opt_m"] = params_to_json(state.opt.m);
    j["opt_v"] = params_to_json(state.opt.v);
    j["opt_t"] = state.opt.t;
    j["bank_capacity"] = state.bank.capacity();
    json bank = json::array();
    for (const auto& e : state.bank.snapshot()) {
        std::vector<double> key(e.key.data(), e.key.data() + e.key.size());
        bank.push_back({{"key", key}, {"path", e.path}, {"source", e.source_id}});
    }
    j["bank"] = bank;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write state file: " + path);
    out << j.dump() << "\n";
}

TrainState load_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open state file: " + path);
    json j;
    in >> j;

    model::EncoderConfig cfg = config_from_json(j.at("config"));
    model::Vocab vocab;
    vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
    for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[static_cast<std::size_t>(i)]] = i;

    Rng dummy(0);
    EncoderParams query = EncoderParams::init(cfg, vocab.size(), dummy);
    EncoderParams key = query;
    params_from_json(j.at("query"), query);
    params_from_json(j.at("key"), key);

    TrainState state(std::move(query), std::move(key), std::move(vocab), j.at("bank_capacity").get<std::size_t>());
    state.step = j.at("step").get<long>();
    params_from_json(j.at("opt_m"), state.opt.m);
    params_from_json(j.at("opt_v"), state.opt.v);
    state.opt.t = j.at("opt_t").get<long>();

    std::vector<model::BankEntry> entries;
    for (const auto& e : j.at("bank")) {
        model::BankEntry be;
        auto key_vals = e.at("key").get<std::vector<double>>();
        be.key = Eigen::Map<const VectorXd>(key_vals.data(), static_cast<Eigen::Index>(key_vals.size()));
        be.path = e.at("path").get<ConceptPath>();
        be.source_id = e.at("source").get<std::string>();
        entries.push_back(std::move(be));
    }
    state.bank.enqueue(entries);
    return state;
}

RunResult run_pretraining(const std::vector<Question>& corpus, const KnowledgeHierarchy& hierarchy,
                          const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate(corpus.size());
    for (const auto& q : corpus) validate_path(q.concepts, hierarchy);

    std::filesystem::create_directories(out_dir);
    std::ofstream metrics(out_dir + "/metrics.jsonl");
    if (!metrics) throw ParseError("cannot write metrics log in " + out_dir);

    TrainState state = init_state(corpus, cfg);
    RunResult result;
    for (int s = 0; s < cfg.steps; ++s) {
        std::vector<Question> batch = batch_for_step(corpus, cfg, state.step);
        StepReport rep = pretrain_step(state, batch, cfg);
        json rec{{"step", s},
                 {"loss", rep.mean_loss},
                 {"per_rank", rep.per_rank_mean},
                 {"skipped", rep.skipped_counts}};
        metrics << rec.dump() << "\n";
        result.history.push_back(std::move(rep));
        if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0)
            model::save_params(state.query, state.vocab, out_dir + "/checkpoint-" + std::to_string(s + 1) + ".json");
    }
    model::save_params(state.query, state.vocab, out_dir + "/checkpoint.json");
    save_state(state, out_dir + "/state.json");
    return result;
}

}  // namespace trainer
}  // namespace quesco
