#pragma once

#include <stdexcept>
#include <string>

namespace dyco {

// Precondition or value-domain violation (bad input values, malformed records).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Protocol violation in a stateful workflow (annotation events, study rankings).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Schema mismatch with the offending field path, e.g. "prompt.components[2]".
class SchemaError : public DomainError {
 public:
  SchemaError(std::string field, const std::string& what)
      : DomainError(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ScorerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Raised when a curation pool cannot satisfy a hard constraint; constraint() names the
// CurationConfig field that failed (e.g. "reversal_share").
class CurationError : public DomainError {
 public:
  CurationError(std::string constraint, const std::string& what)
      : DomainError(constraint + ": " + what), constraint_(std::move(constraint)) {}

  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

class ConflictError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dyco
