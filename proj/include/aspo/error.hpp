#pragma once

#include <stdexcept>
#include <string>

namespace aspo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CatalogErrorKind {
  kSchema,
  kDuplicateId,
  kUnknownReference,
  kAsymmetricMatrix,
  kNonzeroDiagonal,
  kConflictSynergyOverlap,
  kPrecedenceCycle,
  kMissingBaseline,
  kInvalidCost,
};

const char* to_string(CatalogErrorKind kind);

class CatalogError : public Error {
 public:
  CatalogError(CatalogErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  CatalogErrorKind kind() const noexcept { return kind_; }

 private:
  CatalogErrorKind kind_;
};

class UnknownPatternError : public Error {
 public:
  explicit UnknownPatternError(const std::string& id)
      : Error("unknown pattern id: " + id), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class TaxonomyError : public Error {
 public:
  using Error::Error;
};

class PerturbationBoundError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

// Agent-stage failures. Schema errors and timeouts are retried once; closed-world
// and contract violations fail the stage immediately.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ClosedWorldViolation : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class BackendTimeout : public Error {
 public:
  using Error::Error;
};

}  // namespace aspo
