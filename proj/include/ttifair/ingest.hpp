#pragma once

// Annotation records, the human correction log, and the merge that produces
// the effective annotation layer.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"

namespace ttifair {

// An annotation is either labeled or explicitly unlabeled (serialized as "-").
// Unlabeled values never enter a score or a distribution.
template <typename T>
using Annotation = std::optional<T>;

inline constexpr std::string_view kUnlabeled = "-";

enum class Layer : std::uint8_t { Model, Human };

std::string_view to_string(Layer layer);
std::optional<Layer> layer_from_string(std::string_view s);

struct ImageRecord {
    std::string image_id;
    std::string job_id;
    std::string query;
    std::optional<std::string> conditioned_value;
    std::uint64_t seed = 0;
    Annotation<std::string> race;
    Annotation<double> age;  // years, [0, 120]
    Annotation<std::string> gender;
    Annotation<double> relevance;  // {0, 0.5, 1}
    Annotation<int> quality;       // {1, 2, 3}
    std::optional<std::string> caption;
    Layer layer = Layer::Model;

    bool operator==(const ImageRecord&) const = default;
};

enum class Field : std::uint8_t { Race, Age, Gender, Relevance, Quality };

std::string_view to_string(Field field);
std::optional<Field> field_from_string(std::string_view s);

struct Unlabeled {
    bool operator==(const Unlabeled&) const = default;
};
using FieldValue = std::variant<Unlabeled, double, std::string>;

struct CorrectionEvent {
    std::string reviewer_id;
    std::string image_id;
    Field field = Field::Race;
    std::optional<FieldValue> old_value;  // informational; not checked on replay
    FieldValue new_value;
    std::string timestamp;  // ISO-8601 UTC, e.g. 2024-01-31T12:00:00Z

    bool operator==(const CorrectionEvent&) const = default;
};

// A rejected input line.
struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

template <typename T>
struct ReadResult {
    std::vector<T> items;
    std::vector<LineError> errors;
};

// Record (de)serialization. record_from_json throws DataError on schema or
// range violations.
nlohmann::json record_to_json(const ImageRecord& r);
ImageRecord record_from_json(const nlohmann::json& j);

// Reads every line; bad lines are reported and skipped. Blank lines are ignored.
ReadResult<ImageRecord> read_records(std::istream& in);
// Strict form: throws ParseError (with line number) on the first bad line.
std::vector<ImageRecord> parse_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<ImageRecord>& records);

nlohmann::json value_to_json(const FieldValue& v);
FieldValue value_from_json(const nlohmann::json& j);

nlohmann::json correction_to_json(const CorrectionEvent& e);
CorrectionEvent correction_from_json(const nlohmann::json& j);

// Domain check of a correction's new value (and race label when a scheme is given).
std::optional<std::string> check_correction(const CorrectionEvent& e, const AttributeScheme* scheme = nullptr);

ReadResult<CorrectionEvent> read_corrections(std::istream& in);
std::vector<CorrectionEvent> parse_corrections(const std::filesystem::path& path);
void write_corrections(std::ostream& out, const std::vector<CorrectionEvent>& events);

bool is_iso8601_utc(std::string_view s);
std::string utc_now_iso8601();

struct MergeResult {
    std::vector<ImageRecord> records;
    std::vector<CorrectionEvent> dangling;  // unknown image_id
    std::vector<std::pair<CorrectionEvent, std::string>> rejected;  // invalid value
};

// Replays the correction log over the model layer in order; per field the last
// correction wins. Corrected records are marked Layer::Human.
MergeResult merge_layers(const std::vector<ImageRecord>& model, const std::vector<CorrectionEvent>& corrections);

// Labeled counts per attribute value. Throws DataError on a label outside the scheme.
struct LabelCounts {
    std::vector<std::size_t> counts;
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
};
LabelCounts count_labels(const std::vector<ImageRecord>& records, const AttributeScheme& attribute);

// Observed distribution of the sensitive attribute; throws DataError when no
// record is labeled.
Distribution distribution_of(const std::vector<ImageRecord>& records, const AttributeScheme& attribute);

std::vector<ImageRecord> filter_pool(const std::vector<ImageRecord>& records, const std::string& query,
                                     const std::optional<std::string>& conditioned_value);

// Unconditioned (diversity) records only.
std::vector<ImageRecord> diversity_records(const std::vector<ImageRecord>& records);

// External relevance-pipeline output: one {image_id, confidence} per line.
struct ConfidenceRecord {
    std::string image_id;
    double confidence = 0.0;
};
ReadResult<ConfidenceRecord> read_confidences(std::istream& in);
std::vector<ConfidenceRecord> parse_confidences(const std::filesystem::path& path);

}  // namespace ttifair
