#pragma once

#include <stdexcept>
#include <string>

namespace pardec {

// Every error raised by the library derives from Error so callers (the CLI,
// the Python bindings) can catch one type and still report the category.
class Error : public std::runtime_error {
  public:
    Error(const char * category, const std::string & what)
        : std::runtime_error(std::string(category) + ": " + what), category_(category) {}

    const char * category() const noexcept { return category_; }

  private:
    const char * category_;
};

#define PARDEC_DEFINE_ERROR(name, tag)                                            \
    class name : public Error {                                                   \
      public:                                                                     \
        explicit name(const std::string & what) : Error(tag, what) {}             \
    }

PARDEC_DEFINE_ERROR(ConfigError, "configuration error");
PARDEC_DEFINE_ERROR(ConstructionError, "construction error");
PARDEC_DEFINE_ERROR(IndexError, "index error");
PARDEC_DEFINE_ERROR(DomainError, "domain error");
PARDEC_DEFINE_ERROR(PreconditionError, "precondition error");
PARDEC_DEFINE_ERROR(DimensionError, "dimension error");
PARDEC_DEFINE_ERROR(DatasetError, "dataset error");
PARDEC_DEFINE_ERROR(OptimizerError, "optimizer error");
PARDEC_DEFINE_ERROR(TrainingError, "training error");
PARDEC_DEFINE_ERROR(AlignmentError, "alignment error");
PARDEC_DEFINE_ERROR(AnalysisError, "analysis error");
PARDEC_DEFINE_ERROR(IoError, "I/O error");
PARDEC_DEFINE_ERROR(ParseError, "parse error");

#undef PARDEC_DEFINE_ERROR

}  // namespace pardec
