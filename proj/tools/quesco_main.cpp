#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quesco/augment.hpp"
#include "quesco/corpus.hpp"
#include "quesco/eval.hpp"
#include "quesco/khar.hpp"
#include "quesco/manifest.hpp"
#include "quesco/model.hpp"
#include "quesco/trainer.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using namespace quesco;

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

// key = value lines; '#' starts a comment
std::map<std::string, std::string> read_kv_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (!k.empty()) out[k] = v;
    }
    return out;
}

void apply_train_config(trainer::TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) {
        if (k == "batch_size") cfg.batch_size = std::stoi(v);
        else if (k == "steps") cfg.steps = std::stoi(v);
        else if (k == "lr") cfg.lr = std::stod(v);
        else if (k == "weight_decay") cfg.weight_decay = std::stod(v);
        else if (k == "momentum") cfg.momentum = std::stod(v);
        else if (k == "bank_capacity") cfg.bank_capacity = static_cast<std::size_t>(std::stoull(v));
        else if (k == "temperatures") cfg.temperatures.tau = parse_double_list(v);
        else if (k == "p") cfg.aug.p = std::stod(v);
        else if (k == "seed") cfg.seed = std::stoull(v);
        else if (k == "d_e") cfg.encoder.d_e = std::stoi(v);
        else if (k == "n_blocks") cfg.encoder.n_blocks = std::stoi(v);
        else if (k == "d_ff") cfg.encoder.d_ff = std::stoi(v);
        else if (k == "d_h") cfg.encoder.d_h = std::stoi(v);
        else if (k == "d_proj") cfg.encoder.d_proj = std::stoi(v);
        else if (k == "checkpoint_every") cfg.checkpoint_every = std::stoi(v);
        else if (k == "normalize_keys") cfg.encoder.normalize_keys = (v == "true" || v == "1");
        else throw ValidationError("unknown config key: " + k);
    }
}

eval::RepMap load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open embeddings file: " + path);
    eval::RepMap reps;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line);
        auto vals = j.at("rep").get<std::vector<double>>();
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
        reps[j.at("id").get<std::string>()] = v;
    }
    return reps;
}

// deterministic held-out subset: last `fraction` of a seeded shuffle of ids
std::vector<std::string> holdout_ids(const std::vector<Question>& corpus, double fraction, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& q : corpus) ids.push_back(q.id);
    std::sort(ids.begin(), ids.end());
    Rng rng = Rng(seed).split("holdout");
    for (std::size_t i = ids.size() - 1; i > 0; --i)
        std::swap(ids[i], ids[rng.next_below(i + 1)]);
    auto n_hold = static_cast<std::size_t>(fraction * static_cast<double>(ids.size()));
    return {ids.end() - static_cast<std::ptrdiff_t>(n_hold), ids.end()};
}

void print_probe(const eval::ProbeResult& r, const std::string& out_path) {
    json j{{"task", r.task}, {"train_size", r.train_size}, {"test_size", r.test_size}, {"metrics", r.metrics}, {"notes", r.notes}};
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << j.dump(2) << "\n";
    }
    std::cout << r.task << " (train " << r.train_size << ", test " << r.test_size << ")\n";
    for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << v << "\n";
    for (const auto& n : r.notes) std::cout << "  note: " << n << "\n";
}

void write_rank_svg(const std::vector<eval::RankSimRow>& rows, const std::string& path) {
    const int w = 480, h = 320, ml = 50, mb = 40, mt = 20, mr = 20;
    double lo = 1.0, hi = -1.0;
    for (const auto& r : rows) {
        lo = std::min(lo, r.mean);
        hi = std::max(hi, r.mean);
    }
    if (rows.empty()) {
        lo = 0;
        hi = 1;
    }
    double span = std::max(1e-9, hi - lo);
    lo -= 0.1 * span;
    hi += 0.1 * span;
    auto xpos = [&](std::size_t i) {
        return ml + static_cast<double>(i) * (w - ml - mr) / std::max<std::size_t>(1, rows.size() - 1);
    };
    auto ypos = [&](double v) { return mt + (hi - v) / (hi - lo) * (h - mt - mb); };

    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
    std::ostringstream pts;
    for (std::size_t i = 0; i < rows.size(); ++i) pts << xpos(i) << "," << ypos(rows[i].mean) << " ";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << "<circle cx=\"" << xpos(i) << "\" cy=\"" << ypos(rows[i].mean) << "\" r=\"3\" fill=\"steelblue\"/>\n";
        out << "<text x=\"" << xpos(i) << "\" y=\"" << h - mb + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << rows[i].rank << "</text>\n";
    }
    out << "<text x=\"" << (w / 2) << "\" y=\"" << h - 6 << "\" font-size=\"12\" text-anchor=\"middle\">khd rank</text>\n";
    out << "<text x=\"14\" y=\"" << (h / 2) << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << (h / 2) << ")\">mean cosine</text>\n";
    out << "</svg>\n";
}

int run(int argc, char** argv) {
    CLI::App app{"quesco: contrastive pre-training of math-question representations"};
    app.require_subcommand(1);

    // ---- gen-corpus ----
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic hierarchy, corpus and similarity labels");
    int levels = 3, per_leaf = 20, label_pairs = 2000;
    std::string branching = "4,3,3";
    std::uint64_t gen_seed = 7;
    std::string gen_out = "data";
    gen->add_option("--levels", levels);
    gen->add_option("--branching", branching, "comma-separated per-level branching factors");
    gen->add_option("--per-leaf", per_leaf);
    gen->add_option("--label-pairs", label_pairs);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out)->required();

    // ---- augment ----
    auto* aug_cmd = app.add_subcommand("augment", "emit augmented variants of every corpus question");
    std::string a_corpus, a_hier, a_out, a_config;
    std::uint64_t a_seed = 7;
    double a_p = 0.3;
    aug_cmd->add_option("--corpus", a_corpus)->required();
    aug_cmd->add_option("--hierarchy", a_hier)->required();
    aug_cmd->add_option("--out", a_out)->required();
    aug_cmd->add_option("--seed", a_seed);
    aug_cmd->add_option("--p", a_p, "per-strategy application probability");
    aug_cmd->add_option("--config", a_config, "key-value config file (p = ...)");

    // ---- pretrain ----
    auto* pre = app.add_subcommand("pretrain", "contrastive pre-training");
    std::string p_corpus, p_hier, p_config, p_outdir;
    std::uint64_t p_seed = 7;
    int p_steps = -1, p_batch = -1;
    double p_holdout = 0.1;
    bool paper_lr = false, no_normalize = false;
    pre->add_option("--corpus", p_corpus)->required();
    pre->add_option("--hierarchy", p_hier)->required();
    pre->add_option("--config", p_config, "key-value config file");
    pre->add_option("--out-dir", p_outdir)->required();
    pre->add_option("--seed", p_seed);
    pre->add_option("--steps", p_steps);
    pre->add_option("--batch-size", p_batch);
    pre->add_option("--holdout", p_holdout, "fraction of questions excluded from pre-training");
    pre->add_flag("--paper-lr", paper_lr, "use the paper learning rate 5e-5");
    pre->add_flag("--no-normalize", no_normalize, "raw dot-product similarities (no key normalization)");

    // ---- embed ----
    auto* emb = app.add_subcommand("embed", "export pre-projector representations as JSONL");
    std::string e_ckpt, e_corpus, e_hier, e_out;
    emb->add_option("--checkpoint", e_ckpt)->required();
    emb->add_option("--corpus", e_corpus)->required();
    emb->add_option("--hierarchy", e_hier)->required();
    emb->add_option("--out", e_out)->required();

    // ---- eval-similarity ----
    auto* evs = app.add_subcommand("eval-similarity", "zero-shot similarity vs gold labels");
    std::string s_emb, s_labels, s_out;
    evs->add_option("--embeddings", s_emb)->required();
    evs->add_option("--labels", s_labels)->required();
    evs->add_option("--out", s_out);

    // ---- eval-concept ----
    auto* evc = app.add_subcommand("eval-concept", "linear concept probe on frozen representations");
    std::string c_emb, c_corpus, c_hier, c_out;
    int c_level = 1;
    std::uint64_t c_seed = 7;
    evc->add_option("--embeddings", c_emb)->required();
    evc->add_option("--corpus", c_corpus)->required();
    evc->add_option("--hierarchy", c_hier)->required();
    evc->add_option("--level", c_level, "concept level (1 or 2)");
    evc->add_option("--seed", c_seed);
    evc->add_option("--out", c_out);

    // ---- eval-difficulty ----
    auto* evd = app.add_subcommand("eval-difficulty", "linear difficulty regression on frozen representations");
    std::string d_emb, d_corpus, d_hier, d_out;
    std::uint64_t d_seed = 7;
    evd->add_option("--embeddings", d_emb)->required();
    evd->add_option("--corpus", d_corpus)->required();
    evd->add_option("--hierarchy", d_hier)->required();
    evd->add_option("--seed", d_seed);
    evd->add_option("--out", d_out);

    // ---- report ----
    auto* rep = app.add_subcommand("report", "mean cosine per khd rank (plus rank-0 augmented pairs)");
    std::string r_ckpt, r_corpus, r_hier, r_out, r_svg, r_anchors;
    std::uint64_t r_seed = 7;
    int r_pairs = 200;
    double r_p = 0.3;
    rep->add_option("--checkpoint", r_ckpt)->required();
    rep->add_option("--corpus", r_corpus)->required();
    rep->add_option("--hierarchy", r_hier)->required();
    rep->add_option("--pairs-per-rank", r_pairs);
    rep->add_option("--seed", r_seed);
    rep->add_option("--p", r_p, "augmentation probability for rank-0 pairs");
    rep->add_option("--anchors-file", r_anchors, "restrict anchors to ids listed one per line");
    rep->add_option("--out", r_out, "JSON output");
    rep->add_option("--svg", r_svg, "SVG chart output");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        GeneratorSpec spec;
        spec.levels = levels;
        spec.branching = parse_int_list(branching);
        spec.questions_per_leaf = per_leaf;
        spec.label_pairs = label_pairs;
        fs::create_directories(gen_out);
        RunManifest::make("gen-corpus", gen_seed, {}, branching + "/" + std::to_string(per_leaf))
            .write(gen_out + "/manifest.json");
        SyntheticCorpus sc = generate_synthetic(spec, gen_seed);
        save_hierarchy(sc.hierarchy, gen_out + "/hierarchy.json");
        save_corpus(sc.questions, gen_out + "/corpus.jsonl");
        save_labels(sc.labels, gen_out + "/labels.jsonl");
        std::cout << "wrote " << sc.questions.size() << " questions, " << sc.labels.size()
                  << " labels, " << sc.hierarchy.concepts.size() << " concepts to " << gen_out << "\n";
        return 0;
    }

    if (aug_cmd->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(a_hier);
        std::vector<Question> corpus = load_corpus(a_corpus, kh);
        augment::AugmentConfig cfg;
        cfg.p = a_p;
        if (!a_config.empty())
            for (const auto& [k, v] : read_kv_config(a_config))
                if (k == "p") cfg.p = std::stod(v);
        RunManifest::make("augment", a_seed, {a_corpus, a_hier}, std::to_string(cfg.p))
            .write(a_out + ".manifest.json");
        std::ofstream out(a_out);
        if (!out) throw ParseError("cannot write " + a_out);
        for (const auto& q : corpus) {
            Rng rng = Rng(a_seed).split(q.id);
            augment::AugmentedQuestion v = augment::augment(q, cfg, rng);
            json applied = json::array();
            for (const auto& [strategy, site] : v.applied) applied.push_back({{"strategy", strategy}, {"site", site}});
            json j{{"id", v.question.id},
                   {"content", v.question.content_string()},
                   {"concepts", v.question.concepts},
                   {"applied", applied}};
            if (v.question.difficulty) j["difficulty"] = *v.question.difficulty;
            out << j.dump() << "\n";
        }
        std::cout << "augmented " << corpus.size() << " questions -> " << a_out << "\n";
        return 0;
    }

    if (pre->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(p_hier);
        std::vector<Question> corpus = load_corpus(p_corpus, kh);
        trainer::TrainConfig cfg;
        cfg.seed = p_seed;
        std::string cfg_repr;
        if (!p_config.empty()) {
            auto kv = read_kv_config(p_config);
            apply_train_config(cfg, kv);
            for (const auto& [k, v] : kv) cfg_repr += k + "=" + v + ";";
        }
        if (p_steps > 0) cfg.steps = p_steps;
        if (p_batch > 0) cfg.batch_size = p_batch;
        if (paper_lr) cfg.lr = 5e-5;
        if (no_normalize) cfg.encoder.normalize_keys = false;

        fs::create_directories(p_outdir);
        std::vector<std::string> inputs = {p_corpus, p_hier};
        if (!p_config.empty()) inputs.push_back(p_config);
        RunManifest::make("pretrain", cfg.seed, inputs, cfg_repr).write(p_outdir + "/manifest.json");

        auto held = holdout_ids(corpus, p_holdout, cfg.seed);
        std::set<std::string> held_set(held.begin(), held.end());
        std::vector<Question> train;
        for (const auto& q : corpus)
            if (!held_set.count(q.id)) train.push_back(q);
        {
            std::ofstream hf(p_outdir + "/holdout_ids.txt");
            for (const auto& id : held) hf << id << "\n";
        }
        trainer::RunResult res = trainer::run_pretraining(train, kh, cfg, p_outdir);
        double first = 0, last = 0;
        std::size_t k = std::max<std::size_t>(1, res.history.size() / 10);
        for (std::size_t i = 0; i < k; ++i) first += res.history[i].mean_loss;
        for (std::size_t i = res.history.size() - k; i < res.history.size(); ++i) last += res.history[i].mean_loss;
        std::cout << "trained " << res.history.size() << " steps on " << train.size() << " questions ("
                  << held.size() << " held out); mean loss first 10% " << first / static_cast<double>(k)
                  << ", last 10% " << last / static_cast<double>(k) << "\n";
        return 0;
    }

    if (emb->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(e_hier);
        std::vector<Question> corpus = load_corpus(e_corpus, kh);
        auto [params, vocab] = model::load_params(e_ckpt);
        RunManifest::make("embed", 0, {e_ckpt, e_corpus, e_hier}, "").write(e_out + ".manifest.json");
        std::ofstream out(e_out);
        if (!out) throw ParseError("cannot write " + e_out);
        for (const auto& q : corpus) {
            model::Encoded enc = model::encode(q, params, vocab);
            std::vector<double> rep(enc.rep.data(), enc.rep.data() + enc.rep.size());
            out << json{{"id", q.id}, {"rep", rep}}.dump() << "\n";
        }
        std::cout << "embedded " << corpus.size() << " questions -> " << e_out << "\n";
        return 0;
    }

    if (evs->parsed()) {
        eval::RepMap reps = load_embeddings(s_emb);
        std::vector<SimilarityLabel> labels = load_labels(s_labels);
        if (!s_out.empty())
            RunManifest::make("eval-similarity", 0, {s_emb, s_labels}, "").write(s_out + ".manifest.json");
        print_probe(eval::zero_shot_similarity(reps, labels), s_out);
        return 0;
    }

    if (evc->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(c_hier);
        std::vector<Question> corpus = load_corpus(c_corpus, kh);
        eval::RepMap reps = load_embeddings(c_emb);
        if (c_level < 1 || c_level > kh.levels) throw ValidationError("invalid concept level");
        std::map<std::string, std::string> concept_of;
        for (const auto& q : corpus)
            if (reps.count(q.id)) concept_of[q.id] = q.concepts[static_cast<std::size_t>(c_level - 1)];
        eval::ProbeOptions opts;
        opts.seed = c_seed;
        if (!c_out.empty())
            RunManifest::make("eval-concept", c_seed, {c_emb, c_corpus, c_hier}, std::to_string(c_level))
                .write(c_out + ".manifest.json");
        print_probe(eval::concept_probe(reps, concept_of, opts), c_out);
        return 0;
    }

    if (evd->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(d_hier);
        std::vector<Question> corpus = load_corpus(d_corpus, kh);
        eval::RepMap reps = load_embeddings(d_emb);
        std::map<std::string, double> difficulty_of;
        for (const auto& q : corpus)
            if (q.difficulty && reps.count(q.id)) difficulty_of[q.id] = *q.difficulty;
        eval::ProbeOptions opts;
        opts.seed = d_seed;
        if (!d_out.empty())
            RunManifest::make("eval-difficulty", d_seed, {d_emb, d_corpus, d_hier}, "").write(d_out + ".manifest.json");
        print_probe(eval::difficulty_probe(reps, difficulty_of, opts), d_out);
        return 0;
    }

    if (rep->parsed()) {
        KnowledgeHierarchy kh = load_hierarchy(r_hier);
        std::vector<Question> corpus = load_corpus(r_corpus, kh);
        auto [params, vocab] = model::load_params(r_ckpt);

        std::vector<Question> anchors = corpus;
        if (!r_anchors.empty()) {
            std::ifstream af(r_anchors);
            if (!af) throw ParseError("cannot open anchors file: " + r_anchors);
            std::set<std::string> allowed;
            std::string id;
            while (std::getline(af, id))
                if (!id.empty()) allowed.insert(id);
            anchors.clear();
            for (const auto& q : corpus)
                if (allowed.count(q.id)) anchors.push_back(q);
        }
        if (anchors.empty()) throw ValidationError("no anchor questions selected");

        eval::RepMap reps;
        for (const auto& q : anchors) reps[q.id] = model::encode(q, params, vocab).rep;

        // rank-0: anchors vs their own augmented views
        augment::AugmentConfig acfg;
        acfg.p = r_p;
        Rng rng = Rng(r_seed).split("report");
        std::vector<double> rank0;
        for (int i = 0; i < r_pairs; ++i) {
            const Question& q = anchors[rng.next_below(anchors.size())];
            Rng arng = Rng(r_seed).split("rank0").split(q.id).split(static_cast<std::uint64_t>(i));
            augment::AugmentedQuestion v = augment::augment(q, acfg, arng);
            rank0.push_back(eval::cosine(reps.at(q.id), model::encode(v.question, params, vocab).rep));
        }

        auto rows = eval::rank_similarity_report(reps, anchors, kh.levels, static_cast<std::size_t>(r_pairs), rng, &rank0);

        std::cout << "rank  pairs  mean_cosine  stddev\n";
        for (const auto& row : rows)
            std::cout << row.rank << "     " << row.pairs << "    " << row.mean << "  " << row.stddev << "\n";
        if (!r_out.empty()) {
            RunManifest::make("report", r_seed, {r_ckpt, r_corpus, r_hier}, std::to_string(r_pairs))
                .write(r_out + ".manifest.json");
            json rows_j = json::array();
            for (const auto& row : rows)
                rows_j.push_back({{"rank", row.rank}, {"pairs", row.pairs}, {"mean", row.mean}, {"stddev", row.stddev}});
            std::ofstream out(r_out);
            out << rows_j.dump(2) << "\n";
        }
        if (!r_svg.empty()) write_rank_svg(rows, r_svg);
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const quesco::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const quesco::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
