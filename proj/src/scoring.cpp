#include "ttifair/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "ttifair/error.hpp"

namespace ttifair {

namespace {

constexpr int kUnlabeledGender = -1;

// Hot-loop view of an image: gender as a category index (categories.size() for
// a label outside the list), age as NaN when unlabeled.
struct CompactImage {
    int gender = kUnlabeledGender;
    double age = std::numeric_limits<double>::quiet_NaN();
};

struct CompactPersona {
    int gender = 0;
    double age = 0.0;
};

int gender_index(const std::vector<std::string>& genders, const std::string& label) {
    auto it = std::find(genders.begin(), genders.end(), label);
    return static_cast<int>(it - genders.begin());
}

std::vector<CompactImage> compact_pool(const std::vector<ImageRecord>& pool, const PersonaFeatures& f) {
    std::vector<CompactImage> out;
    out.reserve(pool.size());
    for (const auto& r : pool) {
        CompactImage c;
        if (f.use_gender() && r.gender) c.gender = gender_index(f.genders, *r.gender);
        if (f.use_age && r.age) c.age = *r.age;
        out.push_back(c);
    }
    return out;
}

std::vector<CompactPersona> compact_personas(const std::vector<Persona>& personas, const PersonaFeatures& f) {
    std::vector<CompactPersona> out;
    out.reserve(personas.size());
    for (const auto& p : personas) out.push_back({f.use_gender() ? gender_index(f.genders, p.gender) : 0, p.age});
    return out;
}

double age_score(double persona_age, double image_age, double width) {
    return std::clamp(1.0 - std::fabs(persona_age - image_age) / width, 0.0, 1.0);
}

// NaN when a scored feature is unlabeled.
double compact_nash(const CompactPersona& p, const CompactImage& img, const PersonaFeatures& f) {
    double parts[2];
    std::size_t n = 0;
    if (f.use_gender()) {
        if (img.gender == kUnlabeledGender) return std::numeric_limits<double>::quiet_NaN();
        parts[n++] = img.gender == p.gender ? 1.0 : 0.0;
    }
    if (f.use_age) {
        if (std::isnan(img.age)) return std::numeric_limits<double>::quiet_NaN();
        parts[n++] = age_score(p.age, img.age, f.age_width());
    }
    return nash(std::span<const double>(parts, n));
}

// Best Nash score over one persona's sample; NaN when every sampled image is skipped.
double persona_best(const CompactPersona& p, std::span<const CompactImage> pool, const PersonaFeatures& f,
                    std::size_t sample_size, RandomStream rng, std::vector<std::size_t>& scratch) {
    const std::size_t n = pool.size();
    const std::size_t take = std::min(sample_size, n);
    scratch.resize(n);
    std::iota(scratch.begin(), scratch.end(), std::size_t{0});
    if (take < n) {
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
            std::swap(scratch[k], scratch[j]);
        }
    }
    double best = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < take; ++k) {
        const double s = compact_nash(p, pool[scratch[k]], f);
        if (!std::isnan(s) && (std::isnan(best) || s > best)) best = s;
    }
    return best;
}

void require_labeled_image(std::span<const CompactImage> pool, const PersonaFeatures& f) {
    const bool any = std::any_of(pool.begin(), pool.end(), [&](const CompactImage& c) {
        return (!f.use_gender() || c.gender != kUnlabeledGender) && (!f.use_age || !std::isnan(c.age));
    });
    if (!any) throw DataError("rep_attr_score: pool has no fully labeled image");
}

RepAttrResult reduce_maxima(const std::vector<double>& maxima) {
    RepAttrResult r;
    double sum = 0.0;
    for (double m : maxima) {
        if (std::isnan(m)) continue;
        sum += m;
        ++r.contributing;
    }
    if (r.contributing == 0) throw DataError("rep_attr_score: no persona drew a labeled image");
    r.score = sum / static_cast<double>(r.contributing);
    return r;
}

template <typename T, typename Pred>
std::optional<double> mean_if(const std::vector<T>& xs, Pred get) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& x : xs) {
        if (auto v = get(x)) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace

PersonaFeatures persona_features(const EvalConfig& cfg) {
    PersonaFeatures f;
    for (const auto& spec : cfg.inclusion_features) {
        if (spec.name == "gender" && spec.kind == FeatureKind::CategoricalMatch) {
            f.genders = spec.categories;
        } else if (spec.name == "age" && spec.kind == FeatureKind::NumericRange) {
            f.use_age = true;
            f.age_min = spec.min;
            f.age_max = spec.max;
        } else {
            throw DataError("unsupported inclusion feature \"" + spec.name + "\" (expected categorical gender or numeric age)");
        }
    }
    if (!f.use_gender() && !f.use_age) throw DataError("no inclusion features configured");
    return f;
}

std::vector<Persona> sample_personas(const EvalConfig& cfg, const RandomStream& stream) {
    const PersonaFeatures f = persona_features(cfg);
    const auto lo = static_cast<std::int64_t>(std::ceil(f.age_min));
    const auto hi = static_cast<std::int64_t>(std::floor(f.age_max));
    if (f.use_age && lo > hi) throw DataError("age range holds no whole year");

    std::vector<Persona> out;
    out.reserve(static_cast<std::size_t>(cfg.persona_count));
    for (std::int64_t i = 0; i < cfg.persona_count; ++i) {
        RandomStream rng = stream.substream(static_cast<std::uint64_t>(i));
        Persona p;
        if (f.use_gender()) p.gender = f.genders[rng.below(f.genders.size())];
        if (f.use_age) {
            if (cfg.age_distribution.kind == AgeDistributionKind::Uniform) {
                p.age = static_cast<double>(rng.uniform_int(lo, hi));
            } else {
                const double x = std::round(rng.normal(cfg.age_distribution.mean, cfg.age_distribution.stddev));
                p.age = std::clamp(x, static_cast<double>(lo), static_cast<double>(hi));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::optional<double> score_gender(const Persona& p, const ImageRecord& img) {
    if (!img.gender) return std::nullopt;
    return *img.gender == p.gender ? 1.0 : 0.0;
}

std::optional<double> score_age(const Persona& p, const ImageRecord& img, double range_width) {
    if (!img.age) return std::nullopt;
    if (!(range_width > 0.0)) throw DataError("score_age: range width must be > 0");
    return age_score(p.age, *img.age, range_width);
}

double nash(std::span<const double> scores) {
    if (scores.empty()) throw DataError("nash: empty score list");
    if (scores.size() == 1) return scores[0];
    double product = 1.0;
    for (double s : scores) {
        if (s == 0.0) return 0.0;
        product *= s;
    }
    return std::pow(product, 1.0 / static_cast<double>(scores.size()));
}

std::optional<double> image_nash(const Persona& p, const ImageRecord& img, const PersonaFeatures& features) {
    std::vector<double> parts;
    if (features.use_gender()) {
        auto g = score_gender(p, img);
        if (!g) return std::nullopt;
        parts.push_back(*g);
    }
    if (features.use_age) {
        auto a = score_age(p, img, features.age_width());
        if (!a) return std::nullopt;
        parts.push_back(*a);
    }
    return nash(parts);
}

RepAttrResult rep_attr_score(const std::vector<ImageRecord>& pool, const std::vector<Persona>& personas,
                             const PersonaFeatures& features, std::size_t sample_size, const RandomStream& stream) {
    const auto images = compact_pool(pool, features);
    require_labeled_image(images, features);
    const auto people = compact_personas(personas, features);
    std::vector<double> maxima(people.size());
    const auto count = static_cast<std::ptrdiff_t>(people.size());

#pragma omp parallel
    {
        std::vector<std::size_t> scratch;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            maxima[idx] = persona_best(people[idx], images, features, sample_size, stream.substream(idx), scratch);
        }
    }
    return reduce_maxima(maxima);
}

RepAttrResult rep_attr_score_serial(const std::vector<ImageRecord>& pool, const std::vector<Persona>& personas,
                                    const PersonaFeatures& features, std::size_t sample_size,
                                    const RandomStream& stream) {
    const auto images = compact_pool(pool, features);
    require_labeled_image(images, features);
    const auto people = compact_personas(personas, features);
    std::vector<double> maxima(people.size());
    std::vector<std::size_t> scratch;
    for (std::size_t i = 0; i < people.size(); ++i) {
        maxima[i] = persona_best(people[i], images, features, sample_size, stream.substream(i), scratch);
    }
    return reduce_maxima(maxima);
}

double relevance_from_confidence(double confidence) {
    if (confidence > 0.3) return 1.0;
    if (confidence < 0.2) return 0.0;
    return 0.5;
}

std::vector<std::string> apply_confidences(std::vector<ImageRecord>& records,
                                           const std::vector<ConfidenceRecord>& confidences) {
    std::unordered_map<std::string, ImageRecord*> index;
    for (auto& r : records) index.emplace(r.image_id, &r);
    std::vector<std::string> unmatched;
    for (const auto& c : confidences) {
        auto it = index.find(c.image_id);
        if (it == index.end()) {
            unmatched.push_back(c.image_id);
            continue;
        }
        it->second->relevance = relevance_from_confidence(c.confidence);
    }
    return unmatched;
}

const std::vector<std::string>& default_gender_markers() {
    static const std::vector<std::string> markers{"man", "woman", "boy", "girl", "male", "female"};
    return markers;
}

std::string neutralize_caption(std::string_view text, const std::vector<std::string>& markers) {
    auto is_word = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word(text[i])) {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_word(text[j])) ++j;
        const std::string_view word = text.substr(i, j - i);
        std::string lower(word);
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (std::find(markers.begin(), markers.end(), lower) != markers.end()) {
            out += std::isupper(static_cast<unsigned char>(word.front())) ? "Person" : "person";
        } else {
            out += word;
        }
        i = j;
    }
    return out;
}

double relevance_score(const std::vector<ImageRecord>& pool) {
    auto m = mean_if(pool, [](const ImageRecord& r) { return r.relevance; });
    if (!m) throw DataError("relevance_score: no labeled relevance in pool");
    return *m;
}

QualityScore quality_score(const std::vector<ImageRecord>& pool) {
    auto m = mean_if(pool, [](const ImageRecord& r) -> std::optional<double> {
        if (!r.quality) return std::nullopt;
        return static_cast<double>(*r.quality);
    });
    if (!m) throw DataError("quality_score: no labeled quality in pool");
    return {*m, (*m - 1.0) / 2.0};
}

std::optional<CrowdAnswer> crowd_answer_from_string(std::string_view s) {
    if (s == "both") return CrowdAnswer::Both;
    if (s == "either") return CrowdAnswer::Either;
    if (s == "none") return CrowdAnswer::None;
    return std::nullopt;
}

std::string_view to_string(CrowdAnswer a) {
    switch (a) {
        case CrowdAnswer::Both: return "both";
        case CrowdAnswer::Either: return "either";
        case CrowdAnswer::None: return "none";
    }
    return "?";
}

double crowd_inclusion_score(CrowdAnswer answer) {
    switch (answer) {
        case CrowdAnswer::Both: return 1.0;
        case CrowdAnswer::Either: return 0.5;
        case CrowdAnswer::None: return 0.0;
    }
    return 0.0;
}

double crowd_inclusion_score(std::string_view answer) {
    auto a = crowd_answer_from_string(answer);
    if (!a) throw DataError("unknown survey answer \"" + std::string(answer) + "\" (expected both, either or none)");
    return crowd_inclusion_score(*a);
}

double crowd_quality_score(long selected, long set_size) {
    if (set_size < 1) throw DataError("crowd_quality_score: set size must be >= 1");
    if (selected < 0 || selected > set_size) throw DataError("crowd_quality_score: selected count outside [0, set size]");
    return static_cast<double>(selected) / static_cast<double>(set_size);
}

const CellScores* ScoreTable::cell(const std::string& value, const std::string& query) const {
    for (const auto& c : cells) {
        if (c.value == value && c.query == query) return &c;
    }
    return nullptr;
}

const MarginalScores* ScoreTable::marginal(const std::string& value) const {
    for (const auto& m : marginals) {
        if (m.value == value) return &m;
    }
    return nullptr;
}

ScoreTable build_score_table(const std::vector<ImageRecord>& records, const EvalConfig& cfg,
                             const std::vector<Persona>& personas, const RandomStream& stream) {
    const PersonaFeatures features = persona_features(cfg);
    const auto sample_size = static_cast<std::size_t>(cfg.persona_sample_size);
    ScoreTable table;

    for (const auto& value : cfg.attribute.values) {
        for (const auto& query : cfg.queries) {
            const auto pool = filter_pool(records, query, value);
            if (pool.empty()) continue;
            CellScores cell;
            cell.value = value;
            cell.query = query;
            cell.images = pool.size();
            const bool rep_labeled = std::any_of(pool.begin(), pool.end(), [&](const ImageRecord& r) {
                return (!features.use_gender() || r.gender) && (!features.use_age || r.age);
            });
            if (rep_labeled) {
                cell.rep_attr = rep_attr_score(pool, personas, features, sample_size,
                                               stream.substream("rep_attr/" + value + "/" + query))
                                    .score;
            }
            if (std::any_of(pool.begin(), pool.end(), [](const ImageRecord& r) { return r.relevance.has_value(); })) {
                cell.relevance = relevance_score(pool);
            }
            if (cell.rep_attr && cell.relevance) cell.inclusion = inclusion_score(*cell.rep_attr, *cell.relevance);
            if (std::any_of(pool.begin(), pool.end(), [](const ImageRecord& r) { return r.quality.has_value(); })) {
                const auto q = quality_score(pool);
                cell.quality_raw = q.raw;
                cell.quality_norm = q.norm;
            }
            table.cells.push_back(std::move(cell));
        }
    }
    if (table.cells.empty()) throw DataError("no conditioned (value, query) cell is covered by the records");

    for (const auto& value : cfg.attribute.values) {
        std::vector<CellScores> mine;
        for (const auto& c : table.cells) {
            if (c.value == value && !c.absent()) mine.push_back(c);
        }
        if (mine.empty()) continue;
        MarginalScores m;
        m.value = value;
        m.cells = mine.size();
        m.rep_attr = mean_if(mine, [](const CellScores& c) { return c.rep_attr; });
        m.relevance = mean_if(mine, [](const CellScores& c) { return c.relevance; });
        m.inclusion = mean_if(mine, [](const CellScores& c) { return c.inclusion; });
        m.quality_raw = mean_if(mine, [](const CellScores& c) { return c.quality_raw; });
        m.quality_norm = mean_if(mine, [](const CellScores& c) { return c.quality_norm; });
        table.marginals.push_back(std::move(m));
    }
    return table;
}

namespace {

std::optional<DiversityEntry> diversity_entry(const std::vector<ImageRecord>& pool, const EvalConfig& cfg,
                                              const Distribution& fair, KlScoring mode, std::string query) {
    const LabelCounts counts = count_labels(pool, cfg.attribute);
    if (counts.labeled == 0) return std::nullopt;
    DiversityEntry e;
    e.query = std::move(query);
    e.labeled = counts.labeled;
    e.unlabeled = counts.unlabeled;
    e.observed = distribution_of(pool, cfg.attribute);
    e.kl = kl_divergence(e.observed, fair);
    e.tvd = tvd(e.observed, fair);
    e.score_kl = diversity_from_kl(e.kl, mode);
    e.score_tvd = 1.0 - e.tvd;
    return e;
}

}  // namespace

DiversityScores score_diversity(const std::vector<ImageRecord>& records, const EvalConfig& cfg, KlScoring mode) {
    const auto pool = diversity_records(records);
    const Distribution fair{cfg.fair_weights()};
    auto overall = diversity_entry(pool, cfg, fair, mode, "");
    if (!overall) throw DataError("no labeled unconditioned records for the diversity stage");
    DiversityScores out;
    out.overall = std::move(*overall);
    for (const auto& q : cfg.queries) {
        if (auto e = diversity_entry(filter_pool(pool, q, std::nullopt), cfg, fair, mode, q)) {
            out.queries.push_back(std::move(*e));
        }
    }
    return out;
}

}  // namespace ttifair
