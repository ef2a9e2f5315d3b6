#pragma once

#include <stdexcept>
#include <string>

namespace tunekit {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TUNEKIT_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// search-domain
TUNEKIT_DEFINE_ERROR(EmptySpace);
TUNEKIT_DEFINE_ERROR(InvalidBound);
TUNEKIT_DEFINE_ERROR(NameMismatch);

// solver-core / solvers
TUNEKIT_DEFINE_ERROR(BudgetExhaustedWithNoSuccess);
TUNEKIT_DEFINE_ERROR(SolverUnknown);
TUNEKIT_DEFINE_ERROR(InvalidSetting);
TUNEKIT_DEFINE_ERROR(GridTooLarge);
TUNEKIT_DEFINE_ERROR(CovarianceDegenerate);

// constraints
TUNEKIT_DEFINE_ERROR(UnknownDimension);
TUNEKIT_DEFINE_ERROR(InvalidConstraint);

// cross-validation
TUNEKIT_DEFINE_ERROR(InvalidFoldCount);
TUNEKIT_DEFINE_ERROR(OverlappingGroups);
TUNEKIT_DEFINE_ERROR(IndexOutOfRange);

// metrics
TUNEKIT_DEFINE_ERROR(DegenerateLabels);
TUNEKIT_DEFINE_ERROR(LengthMismatch);
TUNEKIT_DEFINE_ERROR(EmptyInput);
TUNEKIT_DEFINE_ERROR(UnknownMetric);
TUNEKIT_DEFINE_ERROR(NonFiniteInput);

// interop-protocol
TUNEKIT_DEFINE_ERROR(MalformedJson);
TUNEKIT_DEFINE_ERROR(Timeout);
TUNEKIT_DEFINE_ERROR(PeerClosed);

#undef TUNEKIT_DEFINE_ERROR

/// A message failed schema validation; `field()` names the offending key.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string field, const std::string& what)
      : Error("schema violation at '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised by a cross-validation fold that failed; carries its coordinates.
class FoldFailure : public Error {
 public:
  FoldFailure(std::size_t iteration, std::size_t fold, const std::string& what)
      : Error("fold failure (iteration " + std::to_string(iteration) + ", fold " +
              std::to_string(fold) + "): " + what),
        iteration_(iteration),
        fold_(fold) {}

  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t fold() const noexcept { return fold_; }

 private:
  std::size_t iteration_;
  std::size_t fold_;
};

}  // namespace tunekit
