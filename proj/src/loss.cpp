#include "quesco/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quesco {
namespace loss {

void Temperatures::validate() const {
    if (tau.size() < 2) throw ValidationError("need at least two temperatures (ranks 0 and 1)");
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (!(tau[i] > 0.0)) throw ValidationError("temperatures must be positive");
        if (i > 0 && tau[i] < tau[i - 1]) throw ValidationError("temperatures must be non-decreasing");
    }
}

namespace {

// log(sum exp(t)) over scaled terms, max-subtraction form
double logsumexp(const std::vector<double>& terms) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : terms) mx = std::max(mx, t);
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

}  // namespace

LossReport rince(const std::vector<std::vector<double>>& sims, const Temperatures& tau,
                 std::vector<std::vector<double>>* grad) {
    tau.validate();
    const int ranks = static_cast<int>(tau.tau.size());  // L + 2
    const int top = ranks - 2;                           // L
    if (static_cast<int>(sims.size()) != ranks)
        throw ValidationError("sims must provide one set per rank 0..L+1");

    for (const auto& set : sims)
        for (double s : set)
            if (!std::isfinite(s)) throw ValidationError("non-finite similarity");

    if (grad) {
        grad->assign(sims.size(), {});
        for (std::size_t u = 0; u < sims.size(); ++u) (*grad)[u].assign(sims[u].size(), 0.0);
    }

    LossReport report;
    report.per_rank.assign(static_cast<std::size_t>(top) + 1, 0.0);

    bool any = false;
    for (int i = 0; i <= top; ++i)
        if (!sims[static_cast<std::size_t>(i)].empty()) any = true;
    if (!any) throw ValidationError("all rank sets 0..L are empty; loss undefined");

    for (int i = 0; i <= top; ++i) {
        const auto& own = sims[static_cast<std::size_t>(i)];
        if (own.empty()) {
            report.skipped_ranks.push_back(i);
            continue;
        }
        // numerator: own set at tau_i; denominator: every sample of rank >= i
        // at the temperature of its own rank
        std::vector<double> num_terms, den_terms;
        for (double s : own) num_terms.push_back(s / tau.tau[static_cast<std::size_t>(i)]);
        for (int j = i; j < ranks; ++j)
            for (double s : sims[static_cast<std::size_t>(j)])
                den_terms.push_back(s / tau.tau[static_cast<std::size_t>(j)]);
        const double log_num = logsumexp(num_terms);
        const double log_den = logsumexp(den_terms);
        const double li = log_den - log_num;
        report.per_rank[static_cast<std::size_t>(i)] = li;
        report.total += li;

        if (grad) {
            for (int j = i; j < ranks; ++j) {
                const double tj = tau.tau[static_cast<std::size_t>(j)];
                const auto& set = sims[static_cast<std::size_t>(j)];
                for (std::size_t p = 0; p < set.size(); ++p)
                    (*grad)[static_cast<std::size_t>(j)][p] += std::exp(set[p] / tj - log_den) / tj;
            }
            const double ti = tau.tau[static_cast<std::size_t>(i)];
            for (std::size_t p = 0; p < own.size(); ++p)
                (*grad)[static_cast<std::size_t>(i)][p] -= std::exp(own[p] / ti - log_num) / ti;
        }
    }
    return report;
}

double info_nce(const std::vector<double>& positives, const std::vector<double>& negatives,
                double tau, std::vector<double>* grad_positives, std::vector<double>* grad_negatives) {
    if (positives.empty()) throw ValidationError("info_nce requires at least one positive");
    if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
    std::vector<std::vector<double>> sims = {positives, negatives};
    Temperatures t{{tau, tau}};
    std::vector<std::vector<double>> grad;
    LossReport r = rince(sims, t, (grad_positives || grad_negatives) ? &grad : nullptr);
    if (grad_positives) *grad_positives = grad[0];
    if (grad_negatives) *grad_negatives = grad[1];
    return r.total;
}

}  // namespace loss
}  // namespace quesco
