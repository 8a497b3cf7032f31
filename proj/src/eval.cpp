#include "quesco/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "quesco/khar.hpp"

namespace quesco {
namespace eval {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("pearson needs >= 2 paired values");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// average ranks, ties share the mean rank
std::vector<double> ranks_of(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks_of(x), ranks_of(y));
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw ValidationError("accuracy needs paired labels");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == pred[i]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes) {
    if (truth.size() != pred.size() || truth.empty()) throw ValidationError("macro_f1 needs paired labels");
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (pred[i] == c && truth[i] == c) ++tp;
            if (pred[i] == c && truth[i] != c) ++fp;
            if (pred[i] != c && truth[i] == c) ++fn;
        }
        double f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
        sum += f1;
    }
    return sum / static_cast<double>(num_classes);
}

double mae(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw ValidationError("mae needs paired values");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
    return s / static_cast<double>(truth.size());
}

double rmse(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw ValidationError("rmse needs paired values");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    return std::sqrt(s / static_cast<double>(truth.size()));
}

double doa(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.size() < 2) throw ValidationError("doa needs >= 2 paired values");
    double agree = 0.0;
    long total = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (!(truth[i] > truth[j])) continue;
            ++total;
            if (pred[i] > pred[j])
                agree += 1.0;
            else if (pred[i] == pred[j])
                agree += 0.5;
        }
    if (total == 0) throw ValidationError("doa undefined: all true labels equal");
    return agree / static_cast<double>(total);
}

double cosine(const VectorXd& a, const VectorXd& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine undefined for zero vector");
    return a.dot(b) / (na * nb);
}

ProbeResult zero_shot_similarity(const RepMap& reps, const std::vector<SimilarityLabel>& labels) {
    if (labels.size() < 2) throw ValidationError("need >= 2 labeled pairs");
    std::vector<double> pred, gold;
    for (const auto& l : labels) {
        auto ia = reps.find(l.a), ib = reps.find(l.b);
        if (ia == reps.end() || ib == reps.end())
            throw ValidationError("missing representation for labeled pair " + l.a + "/" + l.b);
        pred.push_back(cosine(ia->second, ib->second));
        gold.push_back(l.score);
    }
    ProbeResult r;
    r.task = "zero-shot-similarity";
    r.test_size = labels.size();
    r.metrics["pearson"] = pearson(pred, gold);
    r.metrics["spearman"] = spearman(pred, gold);
    return r;
}

namespace {

// deterministic 80/20-style split over sorted ids
std::pair<std::vector<std::string>, std::vector<std::string>> split_ids(std::vector<std::string> ids,
                                                                        double train_fraction,
                                                                        std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    Rng rng = Rng(seed).split("probe-split");
    for (std::size_t i = ids.size() - 1; i > 0; --i)
        std::swap(ids[i], ids[rng.next_below(i + 1)]);
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ids.size())));
    n_train = std::min(std::max<std::size_t>(n_train, 1), ids.size() - 1);
    return {{ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train)},
            {ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end()}};
}

}  // namespace

ProbeResult concept_probe(const RepMap& reps, const std::map<std::string, std::string>& concept_of,
                          const ProbeOptions& opts) {
    std::vector<std::string> ids;
    for (const auto& [id, c] : concept_of) {
        if (!reps.count(id)) throw ValidationError("missing representation for " + id);
        ids.push_back(id);
    }
    if (ids.size() < 4) throw ValidationError("too few labeled questions for a probe");

    std::map<std::string, int> class_index;
    for (const auto& [id, c] : concept_of)
        if (!class_index.count(c)) class_index[c] = static_cast<int>(class_index.size());
    const int C = static_cast<int>(class_index.size());
    const auto d = reps.begin()->second.size();

    auto [train_ids, test_ids] = split_ids(ids, opts.train_fraction, opts.seed);

    std::set<int> train_classes;
    for (const auto& id : train_ids) train_classes.insert(class_index.at(concept_of.at(id)));

    MatrixXd x(static_cast<Eigen::Index>(train_ids.size()), d);
    std::vector<int> y;
    for (std::size_t i = 0; i < train_ids.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = reps.at(train_ids[i]).transpose();
        y.push_back(class_index.at(concept_of.at(train_ids[i])));
    }

    // multinomial logistic regression, full-batch gradient descent
    MatrixXd w = MatrixXd::Zero(d, C);
    VectorXd b = VectorXd::Zero(C);
    const auto n = static_cast<double>(train_ids.size());
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        MatrixXd logits = x * w;
        logits.rowwise() += b.transpose();
        MatrixXd probs = logits;
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            double mx = probs.row(r).maxCoeff();
            probs.row(r) = (probs.row(r).array() - mx).exp();
            probs.row(r) /= probs.row(r).sum();
        }
        for (Eigen::Index r = 0; r < probs.rows(); ++r) probs(r, y[static_cast<std::size_t>(r)]) -= 1.0;
        MatrixXd gw = x.transpose() * probs / n + opts.l2 * w;
        VectorXd gb = probs.colwise().sum().transpose() / n;
        w -= opts.lr * gw;
        b -= opts.lr * gb;
    }

    std::vector<int> truth, pred;
    int unseen = 0;
    for (const auto& id : test_ids) {
        int t = class_index.at(concept_of.at(id));
        if (!train_classes.count(t)) ++unseen;
        VectorXd logits = w.transpose() * reps.at(id) + b;
        Eigen::Index best;
        logits.maxCoeff(&best);
        truth.push_back(t);
        pred.push_back(static_cast<int>(best));
    }

    ProbeResult r;
    r.task = "concept-probe";
    r.train_size = train_ids.size();
    r.test_size = test_ids.size();
    r.metrics["accuracy"] = accuracy(truth, pred);
    r.metrics["macro_f1"] = macro_f1(truth, pred, C);
    // chance level of always predicting the most frequent test class
    std::map<int, int> counts;
    for (int t : truth) ++counts[t];
    int top = 0;
    for (const auto& [c, k] : counts) top = std::max(top, k);
    r.metrics["majority_baseline"] = static_cast<double>(top) / static_cast<double>(truth.size());
    if (unseen > 0)
        r.notes.push_back(std::to_string(unseen) + " test items have classes absent from training (scored as errors)");
    return r;
}

ProbeResult difficulty_probe(const RepMap& reps, const std::map<std::string, double>& difficulty_of,
                             const ProbeOptions& opts) {
    std::vector<std::string> ids;
    for (const auto& [id, dval] : difficulty_of) {
        if (!reps.count(id)) throw ValidationError("missing representation for " + id);
        ids.push_back(id);
    }
    if (ids.size() < 4) throw ValidationError("too few labeled questions for a probe");
    const auto d = reps.begin()->second.size();

    auto [train_ids, test_ids] = split_ids(ids, opts.train_fraction, opts.seed);

    MatrixXd x(static_cast<Eigen::Index>(train_ids.size()), d + 1);
    VectorXd y(static_cast<Eigen::Index>(train_ids.size()));
    for (std::size_t i = 0; i < train_ids.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)).head(d) = reps.at(train_ids[i]).transpose();
        x(static_cast<Eigen::Index>(i), d) = 1.0;
        y(static_cast<Eigen::Index>(i)) = difficulty_of.at(train_ids[i]);
    }

    VectorXd w = x.colPivHouseholderQr().solve(y);
    if (!w.allFinite()) {
        // ridge fallback
        MatrixXd a = x.transpose() * x + 1e-6 * MatrixXd::Identity(d + 1, d + 1);
        w = a.ldlt().solve(x.transpose() * y);
    }

    std::vector<double> truth, pred;
    for (const auto& id : test_ids) {
        VectorXd f(d + 1);
        f.head(d) = reps.at(id);
        f(d) = 1.0;
        truth.push_back(difficulty_of.at(id));
        pred.push_back(w.dot(f));
    }

    ProbeResult r;
    r.task = "difficulty-probe";
    r.train_size = train_ids.size();
    r.test_size = test_ids.size();
    r.metrics["mae"] = mae(truth, pred);
    r.metrics["rmse"] = rmse(truth, pred);
    r.metrics["pcc"] = pearson(pred, truth);
    try {
        r.metrics["doa"] = doa(truth, pred);
    } catch (const ValidationError&) {
        r.notes.push_back("doa undefined: all true labels equal");
    }
    return r;
}

std::vector<RankSimRow> rank_similarity_report(const RepMap& reps, const std::vector<Question>& questions,
                                               int levels, std::size_t pairs_per_rank, Rng& rng,
                                               const std::vector<double>* rank0_cosines) {
    std::vector<std::vector<double>> by_rank(static_cast<std::size_t>(levels) + 2);
    if (rank0_cosines) by_rank[0] = *rank0_cosines;

    for (int d = 1; d <= levels + 1; ++d) {
        std::size_t attempts = 0;
        auto& bucket = by_rank[static_cast<std::size_t>(d)];
        while (bucket.size() < pairs_per_rank && attempts < pairs_per_rank * 400) {
            ++attempts;
            const Question& a = questions[rng.next_below(questions.size())];
            const Question& b = questions[rng.next_below(questions.size())];
            if (a.id == b.id) continue;
            if (khar::khd(a.concepts, b.concepts, levels) != d) continue;
            auto ia = reps.find(a.id), ib = reps.find(b.id);
            if (ia == reps.end() || ib == reps.end()) continue;
            bucket.push_back(cosine(ia->second, ib->second));
        }
    }

    std::vector<RankSimRow> rows;
    for (std::size_t u = 0; u < by_rank.size(); ++u) {
        const auto& bucket = by_rank[u];
        if (bucket.empty()) continue;
        double mean = std::accumulate(bucket.begin(), bucket.end(), 0.0) / static_cast<double>(bucket.size());
        double var = 0.0;
        for (double c : bucket) var += (c - mean) * (c - mean);
        var /= static_cast<double>(bucket.size());
        rows.push_back({static_cast<int>(u), bucket.size(), mean, std::sqrt(var)});
    }
    return rows;
}

}  // namespace eval
}  // namespace quesco
