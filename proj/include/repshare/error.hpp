#pragma once

#include <stdexcept>
#include <string>

namespace repshare {

/// Broad failure class. The CLI maps these to exit codes (validation = 2, io = 3).
enum class ErrorClass { validation, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorClass::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorClass::io, what) {}
};

#define REPSHARE_VALIDATION_ERROR(Name)                                      \
  class Name : public ValidationError {                                      \
   public:                                                                   \
    explicit Name(const std::string& what) : ValidationError(#Name ": " + what) {} \
  }

REPSHARE_VALIDATION_ERROR(FormatError);
REPSHARE_VALIDATION_ERROR(UnsupportedDtype);
REPSHARE_VALIDATION_ERROR(UnsupportedLayout);
REPSHARE_VALIDATION_ERROR(ShapeError);
REPSHARE_VALIDATION_ERROR(DegenerateInput);
REPSHARE_VALIDATION_ERROR(UndefinedSimilarity);
REPSHARE_VALIDATION_ERROR(CutViolation);
REPSHARE_VALIDATION_ERROR(UndefinedCorrelation);
REPSHARE_VALIDATION_ERROR(FitError);
REPSHARE_VALIDATION_ERROR(PlanError);

#undef REPSHARE_VALIDATION_ERROR

/// Structural problem in a model graph. Carries the offending stage id (-1 when not stage-specific).
class GraphError : public ValidationError {
 public:
  GraphError(int stage_id, const std::string& what)
      : ValidationError("GraphError: " + (stage_id >= 0 ? "stage " + std::to_string(stage_id) + ": " : std::string()) + what),
        stage_id_(stage_id) {}
  int stage_id() const noexcept { return stage_id_; }

 private:
  int stage_id_;
};

}  // namespace repshare
