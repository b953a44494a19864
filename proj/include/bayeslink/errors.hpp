#pragma once

#include <stdexcept>
#include <string>

namespace bayeslink {

// Every failure raised by the library derives from Error, so callers (the CLI in
// particular) can report a single machine-parsable line: "<kind>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("schema-violation", what) {}
};

// A latent state that has probability zero under the model. Never expected on
// valid input; seeing one means a bookkeeping bug.
class InconsistentState : public Error {
 public:
  explicit InconsistentState(const std::string& what) : Error("inconsistent-state", what) {}
};

class NonIntegrablePosterior : public Error {
 public:
  explicit NonIntegrablePosterior(const std::string& what)
      : Error("nonintegrable-posterior", what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("dimension-mismatch", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config-error", what) {}
};

class IngestError : public Error {
 public:
  explicit IngestError(const std::string& what) : Error("ingest-error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io-error", what) {}
};

}  // namespace bayeslink
