#include "walkeval/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace walkeval {

Error::Error(std::string kind, const std::string& message, ExitCode code)
    : std::runtime_error(message), kind_(std::move(kind)), code_(code) {}

ValidationError::ValidationError(const std::string& message)
    : Error("ValidationError", message, ExitCode::validation) {}

ValidationError::ValidationError(std::string kind, const std::string& message)
    : Error(std::move(kind), message, ExitCode::validation) {}

IoError::IoError(const std::string& message) : Error("IoError", message, ExitCode::io) {}

DomainError::DomainError(const std::string& message)
    : Error("DomainError", message, ExitCode::validation) {}

ParseError::ParseError(const std::string& message, std::size_t line, std::size_t column)
    : ValidationError("ParseError", fmt::format("line {}, column {}: {}", line, column, message)),
      line_(line),
      column_(column) {}

DuplicateMetric::DuplicateMetric(std::string name)
    : ValidationError("DuplicateMetric", fmt::format("duplicate metric name '{}'", name)),
      name_(std::move(name)) {}

UnknownCriterion::UnknownCriterion(std::string name)
    : ValidationError("UnknownCriterion", fmt::format("unknown criterion '{}'", name)),
      name_(std::move(name)) {}

EmptyCriterion::EmptyCriterion(const std::string& criterion)
    : ValidationError("EmptyCriterion",
                      fmt::format("criterion '{}' has no metrics in the registry", criterion)) {}

MissingDescription::MissingDescription(std::string name)
    : ValidationError("MissingDescription", fmt::format("metric '{}' has no description", name)),
      name_(std::move(name)) {}

BackendUnavailable::BackendUnavailable(const std::string& message)
    : Error("BackendUnavailable", message, ExitCode::backend) {}

BackendRejected::BackendRejected(int status, std::string body_excerpt)
    : Error("BackendRejected", fmt::format("backend rejected request with status {}: {}", status, body_excerpt),
            ExitCode::backend),
      status_(status),
      excerpt_(std::move(body_excerpt)) {}

MockScriptMiss::MockScriptMiss(std::string key_digest)
    : Error("MockScriptMiss", fmt::format("mock script has no entry for request key {}", key_digest),
            ExitCode::backend),
      key_(std::move(key_digest)) {}

OrderingViolation::OrderingViolation(const std::string& message)
    : ValidationError("OrderingViolation", message) {}

EmptyCampaign::EmptyCampaign() : ValidationError("EmptyCampaign", "campaign has no images") {}

ResponseError::ResponseError(std::string kind, const std::string& message)
    : ValidationError(std::move(kind), message) {}

MissingMetrics::MissingMetrics(std::vector<std::string> names)
    : ResponseError("MissingMetrics", fmt::format("response is missing scores for: {}", fmt::join(names, ", "))),
      names_(std::move(names)) {}

UnknownMetric::UnknownMetric(std::string name)
    : ResponseError("UnknownMetric", fmt::format("response scores unknown metric '{}'", name)),
      name_(std::move(name)) {}

ScoreOutOfRange::ScoreOutOfRange(std::string name, long long value)
    : ResponseError("ScoreOutOfRange", fmt::format("score {} for '{}' is out of range", value, name)),
      name_(std::move(name)),
      value_(value) {}

NonIntegerScore::NonIntegerScore(std::string name, const std::string& text)
    : ResponseError("NonIntegerScore", fmt::format("score '{}' for '{}' is not an integer", text, name)),
      name_(std::move(name)) {}

AmbiguousScore::AmbiguousScore(std::string name, long long first, long long second)
    : ResponseError("AmbiguousScore",
                    fmt::format("'{}' is scored twice with different values ({} and {})", name, first, second)),
      name_(std::move(name)) {}

DegenerateVariance::DegenerateVariance(const std::string& message)
    : ValidationError("DegenerateVariance", message) {}

TooSmall::TooSmall(const std::string& message) : ValidationError("TooSmall", message) {}

EmptyInput::EmptyInput(const std::string& message) : ValidationError("EmptyInput", message) {}

UnassignedImage::UnassignedImage(std::string image_id)
    : ValidationError("UnassignedImage", fmt::format("image '{}' has no street label", image_id)),
      id_(std::move(image_id)) {}

EmptyCell::EmptyCell(int level, const std::string& criterion)
    : ValidationError("EmptyCell", fmt::format("no records for level {} / {}", level, criterion)) {}

}  // namespace walkeval
