#pragma once

// Fixtures and independent reference implementations shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ttifair/config.hpp"
#include "ttifair/core.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/scoring.hpp"

namespace testsupport {

using namespace ttifair;

inline const std::vector<std::string> kRaces{"Asian", "Black", "Caucasian", "Indian", "Latino", "Middle Eastern"};
inline const std::vector<std::string> kSubsetQueries{"doctor", "cashier", "baker", "secretary", "software engineer", "lawyer"};

inline EvalConfig subset_config() {
    EvalConfig c;
    c.queries = kSubsetQueries;
    c.attribute = {"race", kRaces};
    c.inclusion_features = {{"gender", FeatureKind::CategoricalMatch, {"male", "female"}, 0, 0},
                            {"age", FeatureKind::NumericRange, {}, 15, 65}};
    c.prompt_templates = {"A photo face of a {a} {q}."};
    c.master_seed = 20240131;
    return c;
}

// Two queries, three values, few personas: fast enough for property loops.
inline EvalConfig small_config() {
    EvalConfig c;
    c.queries = {"baker", "lawyer"};
    c.attribute = {"race", {"Asian", "Black", "Latino"}};
    c.inclusion_features = {{"gender", FeatureKind::CategoricalMatch, {"male", "female"}, 0, 0},
                            {"age", FeatureKind::NumericRange, {}, 15, 65}};
    c.prompt_templates = {"A photo of a {a} {q}."};
    c.diversity_seeds = 4;
    c.conditioned_seeds = 2;
    c.images_per_seed = 5;
    c.persona_count = 400;
    c.master_seed = 7;
    return c;
}

inline ImageRecord record(std::string id, std::string query, std::optional<std::string> value,
                          std::optional<std::string> race, std::optional<double> age,
                          std::optional<std::string> gender, std::optional<double> relevance = 1.0,
                          std::optional<int> quality = 3) {
    ImageRecord r;
    r.image_id = std::move(id);
    r.job_id = "job";
    r.query = std::move(query);
    r.conditioned_value = std::move(value);
    r.race = std::move(race);
    r.age = age;
    r.gender = std::move(gender);
    r.relevance = relevance;
    r.quality = quality;
    return r;
}

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("ttifair-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline void write_records_file(const std::filesystem::path& p, const std::vector<ImageRecord>& rs) {
    std::ofstream f(p, std::ios::binary);
    write_records(f, rs);
}

inline Distribution random_distribution(std::mt19937_64& gen, std::size_t n, double zero_chance = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(n);
    double sum = 0.0;
    do {
        sum = 0.0;
        for (auto& x : w) {
            x = u(gen) < zero_chance ? 0.0 : u(gen);
            sum += x;
        }
    } while (sum == 0.0);
    for (auto& x : w) x /= sum;
    return {w};
}

inline Distribution uniform_distribution(std::size_t n) { return {std::vector<double>(n, 1.0 / static_cast<double>(n))}; }

// Direct-summation references.
inline double reference_kl(const Distribution& p, const Distribution& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

inline double reference_tvd(const Distribution& p, const Distribution& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - q[i]);
    return s / 2.0;
}

// Exhaustive persona oracle: every integer age in [age_lo, age_hi] crossed with
// every gender, each scored against the best image of the whole pool.
inline double persona_oracle(const std::vector<ImageRecord>& pool, const std::vector<std::string>& genders, int age_lo,
                             int age_hi, double width) {
    double total = 0.0;
    int n = 0;
    for (int age = age_lo; age <= age_hi; ++age) {
        for (const auto& g : genders) {
            double best = 0.0;
            for (const auto& img : pool) {
                const double sg = (*img.gender == g) ? 1.0 : 0.0;
                const double sa = std::max(0.0, 1.0 - std::fabs(age - *img.age) / width);
                best = std::max(best, std::sqrt(sg * sa));
            }
            total += best;
            ++n;
        }
    }
    return total / n;
}

// A score table holding only per-value marginals.
inline ScoreTable marginal_table(const std::vector<std::string>& values, const std::vector<double>& inclusion,
                                 const std::vector<double>& quality_norm) {
    ScoreTable t;
    for (std::size_t i = 0; i < values.size(); ++i) {
        MarginalScores m;
        m.value = values[i];
        m.cells = 1;
        m.inclusion = inclusion[i];
        m.quality_norm = quality_norm[i];
        m.quality_raw = 1.0 + 2.0 * quality_norm[i];
        t.marginals.push_back(m);
    }
    return t;
}

// Reference score columns.
struct DiversityColumns {
    std::vector<double> kl_model{0.712, 0.805, 0.651, 0.760, 0.477, 0.504};
    std::vector<double> kl_human{0.635, 0.879, 0.560, 0.817, 0.492, 0.453};
    std::vector<double> tvd_model{0.672, 0.700, 0.630, 0.712, 0.512, 0.491};
    std::vector<double> tvd_human{0.622, 0.764, 0.578, 0.730, 0.536, 0.473};
};

struct InclusionColumns {
    std::vector<double> crowd{0.18, 0.62, 0.22, 0.12, 0.27, 0.26};
    std::vector<double> persona_human{0.46, 0.83, 0.47, 0.46, 0.62, 0.46};
};

struct QualityColumns {
    std::vector<double> crowd{2.55, 2.0, 3.10, 2.0, 2.76, 2.0};
    std::vector<double> single{2.6, 2.2, 2.6, 2.2, 2.4, 2.4};
};

}  // namespace testsupport
