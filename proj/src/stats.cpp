#include "ttifair/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ttifair/error.hpp"

namespace ttifair {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DataError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

double kl_divergence(const Distribution& p, const Distribution& q) {
    require_same_size(p.size(), q.size(), "kl_divergence");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw DataError("kl_divergence: reference distribution has zero mass where P > 0");
        sum += p[i] * std::log(p[i] / q[i]);
    }
    // Rounding can leave a tiny negative residue when P == Q.
    return std::max(sum, 0.0);
}

double tvd(const Distribution& p, const Distribution& q) {
    require_same_size(p.size(), q.size(), "tvd");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::fabs(p[i] - q[i]);
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

double diversity_from_kl(double kl, KlScoring mode) {
    const double t = std::exp(-kl);
    return mode == KlScoring::Exp ? t : 1.0 - t;
}

double diversity_score_kl(const Distribution& p, const Distribution& q, KlScoring mode) {
    return diversity_from_kl(kl_divergence(p, q), mode);
}

double diversity_score_tvd(const Distribution& p, const Distribution& q) { return 1.0 - tvd(p, q); }

ParityResult parity_check(const std::vector<std::string>& values, std::span<const double> scores, double epsilon,
                          std::span<const double> weights) {
    if (scores.empty()) throw DataError("parity_check: no scores");
    require_same_size(values.size(), scores.size(), "parity_check");
    if (!weights.empty()) require_same_size(weights.size(), scores.size(), "parity_check weights");

    ParityResult r;
    r.values = values;
    r.scores.assign(scores.begin(), scores.end());
    r.epsilon = epsilon;

    // Terms are summed in sorted order, so the expectation is independent of label order.
    std::vector<std::pair<double, double>> terms;  // (score, weight)
    terms.reserve(scores.size());
    const double uniform = 1.0 / static_cast<double>(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) terms.emplace_back(scores[i], weights.empty() ? uniform : weights[i]);
    std::sort(terms.begin(), terms.end());
    const double base = terms.front().first;
    double offset = 0.0;
    double total_weight = 0.0;
    for (const auto& [s, w] : terms) {
        offset += (s - base) * w;
        total_weight += w;
    }
    r.expectation = base + offset / total_weight;

    r.deviations.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double dev = std::fabs(scores[i] - r.expectation);
        r.deviations.push_back(dev);
        if (dev > epsilon) r.failing_values.push_back(values[i]);
    }
    return r;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require_same_size(x.size(), y.size(), "pearson");
    if (x.size() < 2) throw DataError("pearson: need at least 2 samples");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        // Positions i..j (0-based) share rank mean(i+1 .. j+1).
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    require_same_size(x.size(), y.size(), "spearman");
    if (x.size() < 2) throw DataError("spearman: need at least 2 samples");
    const auto rx = fractional_ranks(x);
    const auto ry = fractional_ranks(y);
    return pearson(rx, ry);
}

AgreementResult agreement(std::span<const double> x, std::span<const double> y) {
    return {pearson(x, y), spearman(x, y), x.size()};
}

}  // namespace ttifair
