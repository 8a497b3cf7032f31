#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "quesco/eval.hpp"
#include "quesco/rng.hpp"

using namespace quesco;
using namespace quesco::eval;

// Hand datasets below were computed independently with a direct transcription
// of the textbook formulas at extended precision.

TEST_CASE("pearson on a fixed 5-element dataset") {
    std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> y{2.0, 1.0, 4.0, 3.0, 7.0};
    // dev products sum 12, dev-square sums 10 and 21.2  =>  r = 12 / sqrt(212)
    double expect = 12.0 / std::sqrt(212.0);
    CHECK(std::abs(pearson(x, y) - expect) <= 1e-10);
    CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> neg{-1.0, -2.0, -3.0, -4.0, -5.0};
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson throws on constant input") {
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), ValidationError);
}

TEST_CASE("spearman with average-rank ties") {
    // x ranks: 1 2 3 4 5 ; y = {10,20,20,30,40} -> ranks {1, 2.5, 2.5, 4, 5}
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{10, 20, 20, 30, 40};
    // Pearson of ranks: computed by hand = 0.9746794344808963
    CHECK(std::abs(spearman(x, y) - 0.9746794344808963) <= 1e-10);
    CHECK(spearman(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
    Rng rng(5);
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(rng.uniform(-1, 1));
        y.push_back(rng.uniform(-1, 1));
    }
    double base = spearman(x, y);
    std::vector<double> yt;
    for (double v : y) yt.push_back(std::exp(3.0 * v) + 7.0);
    CHECK(spearman(x, yt) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("pearson is invariant under positive affine transforms") {
    Rng rng(6);
    std::vector<double> x, y;
    for (int i = 0; i < 50; ++i) {
        x.push_back(rng.uniform(-1, 1));
        y.push_back(rng.uniform(-1, 1));
    }
    double base = pearson(x, y);
    std::vector<double> yt;
    for (double v : y) yt.push_back(2.5 * v - 10.0);
    CHECK(pearson(x, yt) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("macro F1 on a fixed 3-class dataset") {
    //            truth: 0 0 0 1 1 2 2 2 2
    //            pred:  0 0 1 1 2 2 2 0 1
    std::vector<int> truth{0, 0, 0, 1, 1, 2, 2, 2, 2};
    std::vector<int> pred{0, 0, 1, 1, 2, 2, 2, 0, 1};
    // class 0: P=2/3, R=2/3, F1=2/3
    // class 1: P=1/3, R=1/2, F1=2/5
    // class 2: P=2/3, R=1/2, F1=4/7
    double expect = (2.0 / 3.0 + 2.0 / 5.0 + 4.0 / 7.0) / 3.0;
    CHECK(std::abs(macro_f1(truth, pred, 3) - expect) <= 1e-10);
    CHECK(std::abs(accuracy(truth, pred) - 5.0 / 9.0) <= 1e-10);
}

TEST_CASE("mae and rmse on a fixed 6-element dataset") {
    std::vector<double> t{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    std::vector<double> p{0.2, 0.2, 0.1, 0.5, 0.4, 0.9};
    // abs errors: .1 0 .2 .1 .1 .3 -> mae = 0.8/6
    CHECK(std::abs(mae(t, p) - 0.8 / 6.0) <= 1e-10);
    // sq errors: .01 0 .04 .01 .01 .09 -> rmse = sqrt(0.16/6)
    CHECK(std::abs(rmse(t, p) - std::sqrt(0.16 / 6.0)) <= 1e-10);
}

TEST_CASE("doa on a fixed dataset with a prediction tie") {
    std::vector<double> t{0.1, 0.2, 0.3, 0.3, 0.8};
    std::vector<double> p{0.0, 0.5, 0.5, 0.2, 0.9};
    // ordered truth pairs (i>j by truth), excluding the equal-truth pair:
    // (2,1): pred tie 0.5      (4,1): 1
    // (2,0): 1                 (4,2): 1
    // (3,0): 1                 (4,3): 1
    // (1,0): 1                 (3,1): pred 0.2<0.5 -> 0
    // (4,0): 1
    // total = 7.5 / 9
    CHECK(std::abs(doa(t, p) - 7.5 / 9.0) <= 1e-10);
}

TEST_CASE("doa extremes and invariance") {
    std::vector<double> t{0.1, 0.2, 0.3, 0.4};
    CHECK(doa(t, t) == doctest::Approx(1.0));
    std::vector<double> rev{0.4, 0.3, 0.2, 0.1};
    CHECK(doa(t, rev) == doctest::Approx(0.0));
    std::vector<double> mono;
    for (double v : t) mono.push_back(std::tanh(5 * v) + 2);
    CHECK(doa(t, mono) == doctest::Approx(1.0));
    CHECK_THROWS_AS(doa({0.5, 0.5, 0.5}, {0.1, 0.2, 0.3}), ValidationError);
}

TEST_CASE("zero-shot similarity with perfect and inverted gold") {
    RepMap reps;
    reps["a"] = Eigen::Vector2d(1, 0);
    reps["b"] = Eigen::Vector2d(1, 0.2).normalized();
    reps["c"] = Eigen::Vector2d(0, 1);
    reps["d"] = Eigen::Vector2d(-1, 0.1).normalized();
    std::vector<SimilarityLabel> labels;
    std::vector<std::pair<std::string, std::string>> pairs{{"a", "b"}, {"a", "c"}, {"a", "d"}, {"b", "c"}, {"b", "d"}};
    for (auto& [u, v] : pairs) {
        double c = cosine(reps[u], reps[v]);
        labels.push_back({u, v, (c + 1) / 2});  // monotone in cosine
    }
    ProbeResult r = zero_shot_similarity(reps, labels);
    CHECK(r.metrics.at("spearman") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.metrics.at("pearson") > 0.99);

    for (auto& l : labels) l.score = 1.0 - l.score;
    ProbeResult r2 = zero_shot_similarity(reps, labels);
    CHECK(r2.metrics.at("spearman") == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("concept probe separates linearly separable classes") {
    RepMap reps;
    std::map<std::string, std::string> concept_of;
    Rng rng(8);
    for (int i = 0; i < 60; ++i) {
        std::string id = "q" + std::to_string(i);
        bool cls = i % 2 == 0;
        Eigen::Vector2d base = cls ? Eigen::Vector2d(2, 0) : Eigen::Vector2d(-2, 0);
        reps[id] = base + Eigen::Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        concept_of[id] = cls ? "left" : "right";
    }
    ProbeOptions opts;
    opts.seed = 1;
    ProbeResult r = concept_probe(reps, concept_of, opts);
    CHECK(r.metrics.at("accuracy") == doctest::Approx(1.0));
    CHECK(r.train_size + r.test_size == 60);
    CHECK(r.test_size == 12);  // 80/20 split
}

TEST_CASE("concept probe on uninformative reps scores near chance") {
    RepMap reps;
    std::map<std::string, std::string> concept_of;
    for (int i = 0; i < 90; ++i) {
        std::string id = "q" + std::to_string(i);
        reps[id] = Eigen::Vector2d(1.0, 1.0);  // constant
        concept_of[id] = "c" + std::to_string(i % 3);
    }
    ProbeOptions opts;
    opts.seed = 2;
    ProbeResult r = concept_probe(reps, concept_of, opts);
    CHECK(r.metrics.at("accuracy") <= 0.6);  // cannot beat chance by much
    CHECK(r.metrics.at("majority_baseline") > 0.2);
}

TEST_CASE("difficulty probe recovers a linear target exactly") {
    RepMap reps;
    std::map<std::string, double> diff;
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        std::string id = "q" + std::to_string(i);
        Eigen::Vector3d v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        reps[id] = v;
        diff[id] = 0.5 + 0.1 * v(0) - 0.2 * v(1) + 0.05 * v(2);
    }
    ProbeOptions opts;
    opts.seed = 3;
    ProbeResult r = difficulty_probe(reps, diff, opts);
    CHECK(r.metrics.at("mae") <= 1e-9);
    CHECK(r.metrics.at("rmse") <= 1e-9);
    CHECK(r.metrics.at("pcc") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.metrics.at("doa") == doctest::Approx(1.0));
}

TEST_CASE("rank similarity report on identical reps has equal means") {
    RepMap reps;
    std::vector<Question> qs;
    Rng prng(11);
    for (int i = 0; i < 40; ++i) {
        Question q;
        q.id = "q" + std::to_string(i);
        q.content = {{Segment::Text, "t"}};
        int l1 = i % 2, l2 = i % 4, l3 = i % 8;
        q.concepts = {"a" + std::to_string(l1),
                      "a" + std::to_string(l1) + "b" + std::to_string(l2),
                      "a" + std::to_string(l1) + "b" + std::to_string(l2) + "c" + std::to_string(l3)};
        qs.push_back(q);
        reps[q.id] = Eigen::Vector2d(0.6, 0.8);
    }
    Rng rng(12);
    auto rows = rank_similarity_report(reps, qs, 3, 50, rng);
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
        CHECK(row.mean == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(row.stddev <= 1e-9);
    }
}
