#pragma once

// Distribution distances, diversity scores, multi-class statistical parity,
// and the rank/linear agreement statistics used to compare annotation routes.

#include <span>
#include <string>
#include <vector>

#include "ttifair/core.hpp"

namespace ttifair {

// D_KL(P || Q) in nats, with 0 * ln(0 / q) = 0. Q must be strictly positive.
// Throws DataError on a dimension mismatch.
double kl_divergence(const Distribution& p, const Distribution& q);

// Total variation distance, 1/2 * sum |P(a) - Q(a)|, in [0, 1].
double tvd(const Distribution& p, const Distribution& q);

// How the KL divergence is mapped onto a [0, 1] diversity score.
enum class KlScoring {
    Exp,      // exp(-KL): 1 when P = Q, 1/n for a point mass against uniform over n
    Literal,  // 1 - exp(-KL): the printed complement, kept for comparison runs
};

double diversity_from_kl(double kl, KlScoring mode = KlScoring::Exp);
double diversity_score_kl(const Distribution& p, const Distribution& q, KlScoring mode = KlScoring::Exp);
double diversity_score_tvd(const Distribution& p, const Distribution& q);

struct ParityResult {
    std::vector<std::string> values;
    std::vector<double> scores;
    double expectation = 0.0;
    std::vector<double> deviations;  // |score - expectation|, aligned with values
    double epsilon = 0.0;
    std::vector<std::string> failing_values;  // deviation > epsilon

    bool passed() const { return failing_values.empty(); }
};

// Every value's score must lie within epsilon of the expectation over values.
// The expectation is the arithmetic mean, or the weighted mean when `weights`
// (the fair distribution) is given. Throws DataError on empty or misaligned input.
ParityResult parity_check(const std::vector<std::string>& values, std::span<const double> scores, double epsilon,
                          std::span<const double> weights = {});

// Sample Pearson correlation. Throws DataError on length mismatch, n < 2, or a
// constant series.
double pearson(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the mean of the positions they occupy.
std::vector<double> fractional_ranks(std::span<const double> x);

// Pearson correlation of the fractional ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct AgreementResult {
    double pearson = 0.0;
    double spearman = 0.0;
    std::size_t n = 0;
};

AgreementResult agreement(std::span<const double> x, std::span<const double> y);

}  // namespace ttifair
