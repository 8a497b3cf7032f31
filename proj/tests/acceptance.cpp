// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// hard failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "quesco/augment.hpp"
#include "quesco/corpus.hpp"
#include "quesco/eval.hpp"
#include "quesco/formula.hpp"
#include "quesco/khar.hpp"
#include "quesco/loss.hpp"
#include "quesco/model.hpp"
#include "quesco/rng.hpp"
#include "quesco/trainer.hpp"

using namespace quesco;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << ": criterion " << criterion << " — " << detail << "\n";
    std::cout.flush();
    if (!pass) ++g_failures;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------- criterion 1: RINCE reduces to InfoNCE ----------
void criterion1() {
    Rng rng(101);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        double t = rng.uniform(0.05, 1.0);
        std::vector<double> pos, neg;
        std::size_t np = 1 + rng.next_below(6), nn = rng.next_below(8);
        for (std::size_t i = 0; i < np; ++i) pos.push_back(rng.uniform(-1.0, 1.0));
        for (std::size_t i = 0; i < nn; ++i) neg.push_back(rng.uniform(-1.0, 1.0));
        double a = loss::info_nce(pos, neg, t);
        double b = loss::rince({pos, neg}, loss::Temperatures{{t, t}}).total;
        worst = std::max(worst, std::abs(a - b));
    }
    std::ostringstream os;
    os << "RINCE/InfoNCE reduction, max |diff| = " << worst << " over 100 configs (limit 1e-12)";
    report(1, worst <= 1e-12, os.str());
}

// ---------- criterion 2: analytic gradients vs finite differences ----------
void criterion2() {
    Rng rng(202);
    double worst = 0.0;
    loss::Temperatures tau = loss::Temperatures::paper_default();
    const int levels = 3;

    for (int trial = 0; trial < 20; ++trial) {
        model::EncoderConfig cfg;
        cfg.d_e = 4 + static_cast<int>(rng.next_below(5));       // <= 8
        cfg.d_ff = 2 * cfg.d_e;
        cfg.d_h = cfg.d_e;
        cfg.d_proj = 2 + static_cast<int>(rng.next_below(3));    // <= 4
        cfg.n_blocks = 1;
        int vocab = 8 + static_cast<int>(rng.next_below(13));    // <= 20
        Rng prng = rng.split("params").split(static_cast<std::uint64_t>(trial));
        model::EncoderParams params = model::EncoderParams::init(cfg, vocab, prng);

        int batch = 1 + static_cast<int>(rng.next_below(4));
        std::vector<std::vector<int>> token_batches;
        for (int b = 0; b < batch; ++b) {
            std::vector<int> toks;
            std::size_t n = 2 + rng.next_below(5);
            for (std::size_t i = 0; i < n; ++i) toks.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(vocab))));
            token_batches.push_back(toks);
        }
        // fixed unit-norm keys: one rank-0 view plus 2 keys in each rank 1..L+1
        std::vector<std::vector<Eigen::VectorXd>> keys(static_cast<std::size_t>(levels) + 2);
        for (std::size_t u = 0; u < keys.size(); ++u) {
            std::size_t n_keys = u == 0 ? 1 : 2;
            for (std::size_t k = 0; k < n_keys; ++k) {
                Eigen::VectorXd v(cfg.d_proj);
                for (int d = 0; d < cfg.d_proj; ++d) v(d) = rng.normal();
                keys[u].push_back(v.normalized());
            }
        }

        auto loss_fn = [&](const model::EncoderParams& p, model::EncoderGrads* grads) {
            double total = 0.0;
            for (const auto& toks : token_batches) {
                model::ForwardCache cache;
                model::Encoded q = model::encode(toks, p, &cache);
                std::vector<std::vector<double>> sims(keys.size());
                for (std::size_t u = 0; u < keys.size(); ++u)
                    for (const auto& k : keys[u]) sims[u].push_back(q.key.dot(k));
                std::vector<std::vector<double>> sgrad;
                loss::LossReport lr = loss::rince(sims, tau, grads ? &sgrad : nullptr);
                total += lr.total;
                if (grads) {
                    Eigen::VectorXd dkey = Eigen::VectorXd::Zero(cfg.d_proj);
                    for (std::size_t u = 0; u < keys.size(); ++u)
                        for (std::size_t k = 0; k < keys[u].size(); ++k) dkey += sgrad[u][k] * keys[u][k];
                    model::encode_backward(p, cache, dkey, *grads);
                }
            }
            return total;
        };

        model::EncoderGrads analytic = model::EncoderGrads::zeros_like(params);
        loss_fn(params, &analytic);

        std::vector<const Eigen::MatrixXd*> grad_ptrs;
        analytic.store.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& g) { grad_ptrs.push_back(&g); });

        const double h = 1e-6;
        std::size_t ti = 0;
        params.for_each_tensor([&](const std::string&, Eigen::MatrixXd& theta) {
            const Eigen::MatrixXd& g = *grad_ptrs[ti++];
            for (Eigen::Index i = 0; i < theta.rows(); ++i)
                for (Eigen::Index j = 0; j < theta.cols(); ++j) {
                    double orig = theta(i, j);
                    theta(i, j) = orig + h;
                    double up = loss_fn(params, nullptr);
                    theta(i, j) = orig - h;
                    double dn = loss_fn(params, nullptr);
                    theta(i, j) = orig;
                    double fd = (up - dn) / (2 * h);
                    // pass condition |a-f| <= atol + rtol*max(|a|,|f|) with
                    // rtol=1e-5, atol=1e-8, expressed as a denominator floor:
                    // central differences at h=1e-6 carry ~eps*|loss|/h ~ 1e-8
                    // of roundoff, which would dominate near-zero gradients.
                    double rel = std::abs(g(i, j) - fd) / std::max({std::abs(g(i, j)), std::abs(fd), 1e-3});
                    worst = std::max(worst, rel);
                }
        });
    }
    std::ostringstream os;
    os << "gradient check, max relative error = " << worst << " over 20 tiny models (limit 1e-5)";
    report(2, worst <= 1e-5, os.str());
}

// ---------- criterion 3: khd oracle + ultrametric ----------
ConceptPath random_path(Rng& rng, int levels, int b) {
    ConceptPath p;
    std::string prefix = "r";
    for (int l = 1; l <= levels; ++l) {
        prefix += "." + std::to_string(rng.next_below(static_cast<std::uint64_t>(b)));
        p.push_back(prefix);
    }
    return p;
}

int khd_oracle(const ConceptPath& a, const ConceptPath& b, int levels) {
    int u = 0;
    for (int l = 0; l < levels && a[static_cast<std::size_t>(l)] == b[static_cast<std::size_t>(l)]; ++l) u = l + 1;
    return u == 0 ? levels + 1 : levels - u + 1;
}

void criterion3() {
    Rng rng(303);
    int mismatches = 0;
    for (int h = 0; h < 50; ++h) {
        int levels = 1 + static_cast<int>(rng.next_below(4));
        int b = 2 + static_cast<int>(rng.next_below(4));
        for (int i = 0; i < 1000; ++i) {
            ConceptPath pa = random_path(rng, levels, b);
            ConceptPath pb = random_path(rng, levels, b);
            if (khar::khd(pa, pb, levels) != khd_oracle(pa, pb, levels)) ++mismatches;
        }
    }
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
        ConceptPath a = random_path(rng, 3, 3);
        ConceptPath b = random_path(rng, 3, 3);
        ConceptPath c = random_path(rng, 3, 3);
        if (khar::khd(a, c, 3) > std::max(khar::khd(a, b, 3), khar::khd(b, c, 3))) ++violations;
    }
    std::ostringstream os;
    os << "khd oracle mismatches = " << mismatches << "/50000 pairs, ultrametric violations = " << violations
       << "/10000 triples";
    report(3, mismatches == 0 && violations == 0, os.str());
}

// ---------- criterion 4: augmentation invariants + golden transforms ----------
void criterion4() {
    int parse_failures = 0, path_changes = 0, invariant_breaks = 0;

    // paper golden transforms
    bool golden = true;
    {
        std::vector<formula::FormulaAst> asts;
        asts.push_back(formula::parse_formula("f(x)=\\cos{(\\frac{\\pi}{2}+2x)}"));
        augment::rename_variable(asts, "x", "u");
        golden &= render_formula(asts[0]) == "f(u)=\\cos{(\\frac{\\pi}{2}+2u)}";
    }
    {
        std::vector<formula::FormulaAst> asts;
        asts.push_back(formula::parse_formula("f(x)=\\cos{(\\frac{\\pi}{2}+2x)}"));
        augment::scale_variable(asts, "x", 2, 1);
        golden &= render_formula(asts[0]) == "f(x)=\\cos{(\\frac{\\pi}{2}+4x)}";
    }
    {
        formula::FormulaAst ast = formula::parse_formula("f(x)=\\cos{(\\frac{\\pi}{2}+2x)}");
        formula::NodePath cos_path;
        for (const auto& [name, path] : formula::index_sites(ast).operators)
            if (name == "cos") cos_path = path;
        golden &= augment::replace_operator(ast, cos_path, "sin");
        golden &= render_formula(ast) == "f(x)=\\sin{(\\frac{\\pi}{2}+2x)}";
    }

    SyntheticCorpus sc = generate_synthetic({}, 404);
    augment::AugmentConfig cfg;
    for (int iter = 0; iter < 10000; ++iter) {
        const Question& q = sc.questions[static_cast<std::size_t>(iter) % sc.questions.size()];
        Rng rng = Rng(static_cast<std::uint64_t>(iter)).split(q.id);

        std::vector<formula::FormulaAst> before_asts;
        std::multiset<std::string> before_text;
        for (const auto& seg : q.content) {
            if (seg.kind == Segment::Formula)
                before_asts.push_back(formula::parse_formula(seg.value));
            else
                before_text.insert(seg.value);
        }
        std::set<std::string> before_vars = augment::question_variables(before_asts);

        augment::AugmentedQuestion v = augment::augment(q, cfg, rng);
        if (v.question.concepts != q.concepts) ++path_changes;

        std::vector<formula::FormulaAst> after_asts;
        std::multiset<std::string> after_text;
        bool parsed = true;
        for (const auto& seg : v.question.content) {
            if (seg.kind == Segment::Formula) {
                try {
                    after_asts.push_back(formula::parse_formula(seg.value));
                } catch (const ParseError&) {
                    parsed = false;
                }
            } else {
                after_text.insert(seg.value);
            }
        }
        if (!parsed) {
            ++parse_failures;
            continue;
        }

        std::set<std::string> fired;
        for (const auto& [strategy, site] : v.applied) fired.insert(strategy);

        // variable rename is a bijection; new name never captured
        if (fired.count("var_rename")) {
            if (augment::question_variables(after_asts).size() != before_vars.size()) ++invariant_breaks;
        } else if (!fired.count("var_rename") && !fired.count("var_scale") && !fired.count("op_synonym") &&
                   !fired.count("num_replace")) {
            // no formula strategy fired: every formula survives verbatim.
            // clause_shuffle may reorder segments and clause_insert may
            // duplicate a clause, so compare canonical renders as multisets
            // and, under insertion, require after to be before plus copies.
            std::multiset<std::string> before_f, after_f;
            for (const auto& a : before_asts) before_f.insert(render_formula(a));
            for (const auto& a : after_asts) after_f.insert(render_formula(a));
            bool same;
            if (fired.count("clause_insert")) {
                same = std::includes(after_f.begin(), after_f.end(), before_f.begin(), before_f.end());
                for (const auto& s : after_f)
                    if (!before_f.count(s)) same = false;  // extras must copy originals
            } else {
                same = before_f == after_f;
            }
            if (!same) ++invariant_breaks;
        }
        // text strategies preserve/reduce the token multiset
        if (!fired.count("text_swap") && !fired.count("text_delete") && !fired.count("clause_shuffle") &&
            !fired.count("clause_insert")) {
            if (before_text != after_text) ++invariant_breaks;
        }
        if (fired.count("text_delete") && !fired.count("clause_insert")) {
            if (after_text.size() + 1 != before_text.size() && after_text.size() != before_text.size())
                ++invariant_breaks;
        }
    }
    std::ostringstream os;
    os << "augmentation suite: parse failures = " << parse_failures << ", path changes = " << path_changes
       << ", invariant breaks = " << invariant_breaks << "/10000 calls, golden transforms "
       << (golden ? "ok" : "MISMATCH");
    report(4, parse_failures == 0 && path_changes == 0 && invariant_breaks == 0 && golden, os.str());
}

// ---------- criterion 5: FIFO + momentum exactness ----------
void criterion5() {
    bool ok = true;
    std::ostringstream os;

    model::MemoryBank bank(2, 2);
    auto entry = [](const std::string& id, double x, double y) {
        model::BankEntry e;
        e.key = Eigen::Vector2d(x, y).normalized();
        e.source_id = id;
        return e;
    };
    bank.enqueue({entry("a", 1, 0)});
    bank.enqueue({entry("b", 0, 1)});
    bank.enqueue({entry("c", 1, 1)});
    auto snap = bank.snapshot();
    ok &= snap.size() == 2 && snap[0].source_id == "b" && snap[1].source_id == "c";

    trainer::TrainConfig defaults;
    ok &= defaults.bank_capacity == 1600;

    model::EncoderConfig cfg;
    cfg.d_e = 8;
    cfg.d_ff = 16;
    cfg.d_h = 8;
    cfg.d_proj = 4;
    Rng r1(1), r2(2);
    model::EncoderParams q = model::EncoderParams::init(cfg, 12, r1);
    model::EncoderParams k0 = model::EncoderParams::init(cfg, 12, r2);

    double worst = 0.0;
    for (double m : {0.0, 0.999, 1.0}) {
        model::EncoderParams k = k0;
        momentum_update(q, k, m);
        std::vector<const Eigen::MatrixXd*> qs, k0s;
        q.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { qs.push_back(&t); });
        k0.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) { k0s.push_back(&t); });
        std::size_t i = 0;
        k.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& t) {
            Eigen::MatrixXd expect = m * (*k0s[i]) + (1.0 - m) * (*qs[i]);
            worst = std::max(worst, (t - expect).cwiseAbs().maxCoeff());
            ++i;
        });
    }
    ok &= worst == 0.0;

    os << "FIFO snapshot [b,c] " << (snap.size() == 2 ? "ok" : "BAD") << ", default capacity "
       << defaults.bank_capacity << ", momentum max elementwise error = " << worst << " for m in {0, 0.999, 1}";
    report(5, ok, os.str());
}

// ---------- criteria 6 & 7: desk-scale end-to-end + determinism ----------
struct DeskRun {
    SyntheticCorpus sc;
    std::vector<Question> train;
    std::vector<Question> held;
    trainer::TrainConfig cfg;
    std::string dir;
    double seconds = 0;
    trainer::RunResult result;
};

DeskRun desk_run(const std::string& tag) {
    DeskRun r;
    r.sc = generate_synthetic({}, 7);  // L=3, 4x3x3, 720 questions
    r.cfg.seed = 7;                    // B=64, 2000 steps, bank 1600, p=0.3, paper temperatures

    std::vector<std::string> ids;
    for (const auto& q : r.sc.questions) ids.push_back(q.id);
    std::sort(ids.begin(), ids.end());
    Rng hr = Rng(7).split("holdout");
    for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[hr.next_below(i + 1)]);
    std::set<std::string> held(ids.end() - static_cast<std::ptrdiff_t>(ids.size() / 10), ids.end());
    for (const auto& q : r.sc.questions)
        (held.count(q.id) ? r.held : r.train).push_back(q);

    r.dir = (fs::temp_directory_path() / ("quesco_acceptance_" + tag)).string();
    fs::remove_all(r.dir);
    auto t0 = std::chrono::steady_clock::now();
    r.result = trainer::run_pretraining(r.train, r.sc.hierarchy, r.cfg, r.dir);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

void criteria6and7() {
    DeskRun run = desk_run("run1");
    auto [params, vocab] = model::load_params(run.dir + "/checkpoint.json");

    // (a) loss decrease
    std::size_t k = run.result.history.size() / 10;
    double first = 0, last = 0;
    for (std::size_t i = 0; i < k; ++i) first += run.result.history[i].mean_loss;
    for (std::size_t i = run.result.history.size() - k; i < run.result.history.size(); ++i)
        last += run.result.history[i].mean_loss;
    first /= static_cast<double>(k);
    last /= static_cast<double>(k);
    bool gate_a = last < first;

    // representations for the whole corpus
    eval::RepMap reps;
    for (const auto& q : run.sc.questions) reps[q.id] = model::encode(q, params, vocab).rep;

    // (b) strictly decreasing rank means on held-out anchors
    Rng rng = Rng(7).split("acceptance-report");
    std::vector<double> rank0;
    augment::AugmentConfig acfg;
    for (int i = 0; i < 200; ++i) {
        const Question& q = run.held[rng.next_below(run.held.size())];
        Rng arng = Rng(7).split("rank0").split(q.id).split(static_cast<std::uint64_t>(i));
        augment::AugmentedQuestion v = augment::augment(q, acfg, arng);
        rank0.push_back(eval::cosine(reps.at(q.id), model::encode(v.question, params, vocab).rep));
    }
    auto rows = eval::rank_similarity_report(reps, run.held, run.sc.hierarchy.levels, 200, rng, &rank0);
    bool gate_b = rows.size() == 5;
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) gate_b &= rows[i].mean > rows[i + 1].mean;

    // (c) zero-shot Spearman (soft)
    eval::ProbeResult zs = eval::zero_shot_similarity(reps, run.sc.labels);
    double spearman = zs.metrics.at("spearman");

    // (d) level-1 concept probe
    std::map<std::string, std::string> concept_of;
    for (const auto& q : run.sc.questions) concept_of[q.id] = q.concepts[0];
    eval::ProbeOptions popts;
    popts.seed = 7;
    eval::ProbeResult cp = eval::concept_probe(reps, concept_of, popts);
    bool gate_d = cp.metrics.at("accuracy") >= 2.0 * cp.metrics.at("majority_baseline");

    // (e) difficulty DOA (soft)
    std::map<std::string, double> diff_of;
    for (const auto& q : run.sc.questions)
        if (q.difficulty) diff_of[q.id] = *q.difficulty;
    eval::ProbeResult dp = eval::difficulty_probe(reps, diff_of, popts);
    double doa = dp.metrics.at("doa");

    bool in_time = run.seconds <= 900.0;
    bool pass6 = gate_a && gate_b && gate_d && in_time;

    std::ostringstream os;
    os << "desk-scale run in " << static_cast<int>(run.seconds) << "s (limit 900s): "
       << "(a) loss " << first << " -> " << last << (gate_a ? " ok" : " NOT DECREASING") << "; (b) rank means";
    for (const auto& row : rows) os << " " << row.mean;
    os << (gate_b ? " strictly decreasing" : " NOT MONOTONE") << "; (c) zero-shot spearman = " << spearman
       << " (soft target 0.5); (d) concept acc " << cp.metrics.at("accuracy") << " vs majority "
       << cp.metrics.at("majority_baseline") << (gate_d ? " ok" : " BELOW 2x") << "; (e) DOA = " << doa
       << " (soft target 0.6)";
    report(6, pass6, os.str());

    // criterion 7: identical second run
    DeskRun run2 = desk_run("run2");
    bool same_metrics = read_file(run.dir + "/metrics.jsonl") == read_file(run2.dir + "/metrics.jsonl");
    bool same_ckpt = read_file(run.dir + "/checkpoint.json") == read_file(run2.dir + "/checkpoint.json");
    std::ostringstream os7;
    os7 << "two seeded runs: metrics logs " << (same_metrics ? "identical" : "DIFFER") << ", checkpoints "
        << (same_ckpt ? "identical" : "DIFFER");
    report(7, same_metrics && same_ckpt, os7.str());
}

// ---------- criterion 8: metric oracles ----------
void criterion8() {
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

    track(eval::pearson({1, 2, 3, 4, 5}, {2, 1, 4, 3, 7}), 12.0 / std::sqrt(212.0));
    track(eval::spearman({1, 2, 3, 4, 5}, {10, 20, 20, 30, 40}), 0.9746794344808963);
    track(eval::macro_f1({0, 0, 0, 1, 1, 2, 2, 2, 2}, {0, 0, 1, 1, 2, 2, 2, 0, 1}, 3),
          (2.0 / 3.0 + 2.0 / 5.0 + 4.0 / 7.0) / 3.0);
    track(eval::mae({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {0.2, 0.2, 0.1, 0.5, 0.4, 0.9}), 0.8 / 6.0);
    track(eval::rmse({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {0.2, 0.2, 0.1, 0.5, 0.4, 0.9}), std::sqrt(0.16 / 6.0));
    track(eval::doa({0.1, 0.2, 0.3, 0.3, 0.8}, {0.0, 0.5, 0.5, 0.2, 0.9}), 7.5 / 9.0);

    std::ostringstream os;
    os << "metric oracles (pearson, spearman, macro-F1, MAE, RMSE, DOA), max |error| = " << worst
       << " (limit 1e-10)";
    report(8, worst <= 1e-10, os.str());
}

}  // namespace

int main() {
    try {
        criterion1();
        criterion2();
        criterion3();
        criterion4();
        criterion5();
        criteria6and7();
        criterion8();
    } catch (const std::exception& e) {
        std::cout << "FAIL: unexpected exception — " << e.what() << "\n";
        return 1;
    }
    std::cout << (g_failures == 0 ? "all criteria passed" : "criteria failed") << "\n";
    return g_failures == 0 ? 0 : 1;
}
