#include "ttifair/ingest.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <regex>
#include <set>
#include <unordered_map>

#include "ttifair/error.hpp"

namespace ttifair {

using nlohmann::json;

namespace {

bool is_unlabeled(const json& v) { return v.is_null() || (v.is_string() && v.get<std::string>() == kUnlabeled); }

bool valid_relevance(double x) { return x == 0.0 || x == 0.5 || x == 1.0; }
bool valid_quality(double x) { return x == 1.0 || x == 2.0 || x == 3.0; }
bool valid_age(double x) { return std::isfinite(x) && x >= 0.0 && x <= 120.0; }

Annotation<std::string> label_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || is_unlabeled(*it)) return std::nullopt;
    if (!it->is_string()) throw DataError(std::string(key) + ": expected a label or \"-\"");
    auto s = it->get<std::string>();
    if (s.empty()) throw DataError(std::string(key) + ": empty label");
    return s;
}

Annotation<double> number_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || is_unlabeled(*it)) return std::nullopt;
    if (!it->is_number()) throw DataError(std::string(key) + ": expected a number or \"-\"");
    return it->get<double>();
}

template <typename T>
json annotation_json(const Annotation<T>& a) {
    return a ? json(*a) : json(kUnlabeled);
}

template <typename T, typename Decode>
ReadResult<T> read_lines(std::istream& in, Decode decode) {
    ReadResult<T> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.items.push_back(decode(json::parse(line)));
        } catch (const json::exception& e) {
            out.errors.push_back({n, e.what()});
        } catch (const DataError& e) {
            out.errors.push_back({n, e.what()});
        }
    }
    return out;
}

template <typename T>
std::vector<T> strict(const std::filesystem::path& path, ReadResult<T> (*reader)(std::istream&)) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    auto result = reader(in);
    if (!result.errors.empty()) throw ParseError(path.string(), result.errors.front().line, result.errors.front().message);
    return std::move(result.items);
}

}  // namespace

std::string_view to_string(Layer layer) { return layer == Layer::Model ? "model" : "human"; }

std::optional<Layer> layer_from_string(std::string_view s) {
    if (s == "model") return Layer::Model;
    if (s == "human") return Layer::Human;
    return std::nullopt;
}

std::string_view to_string(Field field) {
    switch (field) {
        case Field::Race: return "race";
        case Field::Age: return "age";
        case Field::Gender: return "gender";
        case Field::Relevance: return "relevance";
        case Field::Quality: return "quality";
    }
    return "?";
}

std::optional<Field> field_from_string(std::string_view s) {
    for (Field f : {Field::Race, Field::Age, Field::Gender, Field::Relevance, Field::Quality}) {
        if (to_string(f) == s) return f;
    }
    return std::nullopt;
}

json record_to_json(const ImageRecord& r) {
    json quality = r.quality ? json(*r.quality) : json(kUnlabeled);
    return {
        {"image_id", r.image_id},
        {"job_id", r.job_id},
        {"query", r.query},
        {"conditioned_value", r.conditioned_value ? json(*r.conditioned_value) : json(nullptr)},
        {"seed", r.seed},
        {"race", annotation_json(r.race)},
        {"age", annotation_json(r.age)},
        {"gender", annotation_json(r.gender)},
        {"relevance", annotation_json(r.relevance)},
        {"quality", std::move(quality)},
        {"caption", r.caption ? json(*r.caption) : json(nullptr)},
        {"layer", to_string(r.layer)},
    };
}

ImageRecord record_from_json(const json& j) {
    if (!j.is_object()) throw DataError("record must be an object");
    ImageRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    if (r.image_id.empty()) throw DataError("image_id: must be non-empty");
    r.job_id = j.value("job_id", std::string{});
    r.query = j.at("query").get<std::string>();
    if (auto it = j.find("conditioned_value"); it != j.end() && !it->is_null()) {
        r.conditioned_value = it->get<std::string>();
    }
    r.seed = j.value("seed", std::uint64_t{0});
    r.race = label_from(j, "race");
    r.gender = label_from(j, "gender");
    r.age = number_from(j, "age");
    if (r.age && !valid_age(*r.age)) throw DataError("age: out of range [0, 120]");
    r.relevance = number_from(j, "relevance");
    if (r.relevance && !valid_relevance(*r.relevance)) throw DataError("relevance: must be 0, 0.5 or 1");
    if (auto q = number_from(j, "quality")) {
        if (!valid_quality(*q)) throw DataError("quality: must be 1, 2 or 3");
        r.quality = static_cast<int>(*q);
    }
    if (auto it = j.find("caption"); it != j.end() && !it->is_null()) r.caption = it->get<std::string>();
    if (auto it = j.find("layer"); it != j.end()) {
        auto layer = layer_from_string(it->get<std::string>());
        if (!layer) throw DataError("layer: must be model or human");
        r.layer = *layer;
    }
    return r;
}

ReadResult<ImageRecord> read_records(std::istream& in) {
    // Duplicate ids would make corrections ambiguous; the first occurrence wins.
    std::set<std::string> seen;
    return read_lines<ImageRecord>(in, [&seen](const json& j) {
        ImageRecord r = record_from_json(j);
        if (!seen.insert(r.image_id).second) throw DataError("duplicate image_id " + r.image_id);
        return r;
    });
}

std::vector<ImageRecord> parse_records(const std::filesystem::path& path) { return strict(path, &read_records); }

void write_records(std::ostream& out, const std::vector<ImageRecord>& records) {
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

json value_to_json(const FieldValue& v) {
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Unlabeled>) {
                return kUnlabeled;
            } else {
                return x;
            }
        },
        v);
}

FieldValue value_from_json(const json& j) {
    if (is_unlabeled(j)) return Unlabeled{};
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw DataError("value must be a label, a number or \"-\"");
}

json correction_to_json(const CorrectionEvent& e) {
    json j{
        {"reviewer_id", e.reviewer_id},
        {"image_id", e.image_id},
        {"field", to_string(e.field)},
        {"old_value", e.old_value ? value_to_json(*e.old_value) : json(nullptr)},
        {"new_value", value_to_json(e.new_value)},
        {"timestamp", e.timestamp},
    };
    return j;
}

CorrectionEvent correction_from_json(const json& j) {
    if (!j.is_object()) throw DataError("correction must be an object");
    CorrectionEvent e;
    e.reviewer_id = j.value("reviewer_id", std::string{});
    e.image_id = j.at("image_id").get<std::string>();
    auto field = field_from_string(j.at("field").get<std::string>());
    if (!field) throw DataError("field: must be one of race, age, gender, relevance, quality");
    e.field = *field;
    if (auto it = j.find("old_value"); it != j.end() && !it->is_null()) e.old_value = value_from_json(*it);
    e.new_value = value_from_json(j.at("new_value"));
    e.timestamp = j.value("timestamp", std::string{});
    if (!e.timestamp.empty() && !is_iso8601_utc(e.timestamp)) throw DataError("timestamp: not ISO-8601 UTC");
    return e;
}

std::optional<std::string> check_correction(const CorrectionEvent& e, const AttributeScheme* scheme) {
    if (std::holds_alternative<Unlabeled>(e.new_value)) return std::nullopt;
    const auto* num = std::get_if<double>(&e.new_value);
    const auto* text = std::get_if<std::string>(&e.new_value);
    switch (e.field) {
        case Field::Race:
            if (!text || text->empty()) return "race: expected a label";
            if (scheme && scheme->index_of(*text) < 0) return "race: unknown label " + *text;
            return std::nullopt;
        case Field::Gender:
            if (!text || text->empty()) return "gender: expected a label";
            return std::nullopt;
        case Field::Age:
            if (!num || !valid_age(*num)) return "age: expected a number in [0, 120]";
            return std::nullopt;
        case Field::Relevance:
            if (!num || !valid_relevance(*num)) return "relevance: must be 0, 0.5 or 1";
            return std::nullopt;
        case Field::Quality:
            if (!num || !valid_quality(*num)) return "quality: must be 1, 2 or 3";
            return std::nullopt;
    }
    return "unknown field";
}

ReadResult<CorrectionEvent> read_corrections(std::istream& in) {
    return read_lines<CorrectionEvent>(in, correction_from_json);
}

std::vector<CorrectionEvent> parse_corrections(const std::filesystem::path& path) {
    return strict(path, &read_corrections);
}

void write_corrections(std::ostream& out, const std::vector<CorrectionEvent>& events) {
    for (const auto& e : events) out << correction_to_json(e).dump() << '\n';
}

bool is_iso8601_utc(std::string_view s) {
    static const std::regex re(R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d{1,9})?Z$)");
    return std::regex_match(s.begin(), s.end(), re);
}

std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

MergeResult merge_layers(const std::vector<ImageRecord>& model, const std::vector<CorrectionEvent>& corrections) {
    MergeResult out;
    out.records = model;
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(out.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i) index.emplace(out.records[i].image_id, i);

    for (const auto& e : corrections) {
        auto it = index.find(e.image_id);
        if (it == index.end()) {
            out.dangling.push_back(e);
            continue;
        }
        if (auto err = check_correction(e)) {
            out.rejected.emplace_back(e, *err);
            continue;
        }
        ImageRecord& r = out.records[it->second];
        const bool unlabeled = std::holds_alternative<Unlabeled>(e.new_value);
        switch (e.field) {
            case Field::Race:
                r.race = unlabeled ? std::nullopt : Annotation<std::string>(std::get<std::string>(e.new_value));
                break;
            case Field::Gender:
                r.gender = unlabeled ? std::nullopt : Annotation<std::string>(std::get<std::string>(e.new_value));
                break;
            case Field::Age:
                r.age = unlabeled ? std::nullopt : Annotation<double>(std::get<double>(e.new_value));
                break;
            case Field::Relevance:
                r.relevance = unlabeled ? std::nullopt : Annotation<double>(std::get<double>(e.new_value));
                break;
            case Field::Quality:
                r.quality = unlabeled ? std::nullopt : Annotation<int>(static_cast<int>(std::get<double>(e.new_value)));
                break;
        }
        r.layer = Layer::Human;
    }
    return out;
}

LabelCounts count_labels(const std::vector<ImageRecord>& records, const AttributeScheme& attribute) {
    LabelCounts c;
    c.counts.assign(attribute.values.size(), 0);
    for (const auto& r : records) {
        if (!r.race) {
            ++c.unlabeled;
            continue;
        }
        const int idx = attribute.index_of(*r.race);
        if (idx < 0) throw DataError("image " + r.image_id + ": label \"" + *r.race + "\" not in " + attribute.name);
        ++c.counts[static_cast<std::size_t>(idx)];
        ++c.labeled;
    }
    return c;
}

Distribution distribution_of(const std::vector<ImageRecord>& records, const AttributeScheme& attribute) {
    const LabelCounts c = count_labels(records, attribute);
    if (c.labeled == 0) throw DataError("no labeled " + attribute.name + " annotations in pool");
    Distribution d;
    d.weights.reserve(c.counts.size());
    for (auto n : c.counts) d.weights.push_back(static_cast<double>(n) / static_cast<double>(c.labeled));
    return d;
}

std::vector<ImageRecord> filter_pool(const std::vector<ImageRecord>& records, const std::string& query,
                                     const std::optional<std::string>& conditioned_value) {
    std::vector<ImageRecord> out;
    for (const auto& r : records) {
        if (r.query == query && r.conditioned_value == conditioned_value) out.push_back(r);
    }
    return out;
}

std::vector<ImageRecord> diversity_records(const std::vector<ImageRecord>& records) {
    std::vector<ImageRecord> out;
    for (const auto& r : records) {
        if (!r.conditioned_value) out.push_back(r);
    }
    return out;
}

ReadResult<ConfidenceRecord> read_confidences(std::istream& in) {
    return read_lines<ConfidenceRecord>(in, [](const json& j) {
        ConfidenceRecord c{j.at("image_id").get<std::string>(), j.at("confidence").get<double>()};
        if (!(std::isfinite(c.confidence) && c.confidence >= 0.0 && c.confidence <= 1.0)) {
            throw DataError("confidence: must be in [0, 1]");
        }
        return c;
    });
}

std::vector<ConfidenceRecord> parse_confidences(const std::filesystem::path& path) {
    return strict(path, &read_confidences);
}

}  // namespace ttifair
