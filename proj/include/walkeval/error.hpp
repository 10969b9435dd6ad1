#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace walkeval {

/// Process exit codes used by the command line tool.
enum class ExitCode : int {
  ok = 0,
  usage = 2,
  validation = 3,
  backend = 4,
  io = 5,
};

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-readable tag (for example "DuplicateMetric").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message, ExitCode code);

  const std::string& kind() const noexcept { return kind_; }
  ExitCode exit_code() const noexcept { return code_; }

 private:
  std::string kind_;
  ExitCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message);

 protected:
  ValidationError(std::string kind, const std::string& message);
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message);
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message);
};

// ---- registry -------------------------------------------------------------

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class DuplicateMetric : public ValidationError {
 public:
  explicit DuplicateMetric(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnknownCriterion : public ValidationError {
 public:
  explicit UnknownCriterion(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// ---- prompts --------------------------------------------------------------

class EmptyCriterion : public ValidationError {
 public:
  explicit EmptyCriterion(const std::string& criterion);
};

class MissingDescription : public ValidationError {
 public:
  explicit MissingDescription(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// ---- gateway --------------------------------------------------------------

class BackendUnavailable : public Error {
 public:
  explicit BackendUnavailable(const std::string& message);
};

class BackendRejected : public Error {
 public:
  BackendRejected(int status, std::string body_excerpt);
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return excerpt_; }

 private:
  int status_;
  std::string excerpt_;
};

class MockScriptMiss : public Error {
 public:
  explicit MockScriptMiss(std::string key_digest);
  const std::string& key_digest() const noexcept { return key_; }

 private:
  std::string key_;
};

class OrderingViolation : public ValidationError {
 public:
  explicit OrderingViolation(const std::string& message);
};

class EmptyCampaign : public ValidationError {
 public:
  EmptyCampaign();
};

// ---- response parsing -----------------------------------------------------

/// Base for every rejection of a model response.
class ResponseError : public ValidationError {
 protected:
  ResponseError(std::string kind, const std::string& message);
};

class MissingMetrics : public ResponseError {
 public:
  explicit MissingMetrics(std::vector<std::string> names);
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

class UnknownMetric : public ResponseError {
 public:
  explicit UnknownMetric(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class ScoreOutOfRange : public ResponseError {
 public:
  ScoreOutOfRange(std::string name, long long value);
  const std::string& name() const noexcept { return name_; }
  long long value() const noexcept { return value_; }

 private:
  std::string name_;
  long long value_;
};

class NonIntegerScore : public ResponseError {
 public:
  NonIntegerScore(std::string name, const std::string& text);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class AmbiguousScore : public ResponseError {
 public:
  AmbiguousScore(std::string name, long long first, long long second);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// ---- statistics -----------------------------------------------------------

class DegenerateVariance : public ValidationError {
 public:
  explicit DegenerateVariance(const std::string& message);
};

class TooSmall : public ValidationError {
 public:
  explicit TooSmall(const std::string& message);
};

// ---- reporting ------------------------------------------------------------

class EmptyInput : public ValidationError {
 public:
  explicit EmptyInput(const std::string& message);
};

class UnassignedImage : public ValidationError {
 public:
  explicit UnassignedImage(std::string image_id);
  const std::string& image_id() const noexcept { return id_; }

 private:
  std::string id_;
};

class EmptyCell : public ValidationError {
 public:
  EmptyCell(int level, const std::string& criterion);
};

}  // namespace walkeval
