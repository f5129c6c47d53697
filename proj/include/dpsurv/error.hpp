#pragma once

#include <stdexcept>
#include <string>

namespace dpsurv {

// Error taxonomy. `code` maps onto the CLI exit-code contract:
//   usage errors -> 1, data/validation errors -> 2, fatal numerical -> 3.
enum class ErrorCode {
  Usage = 1,
  Data = 2,
  Numeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct SchemaMismatch : Error {
  explicit SchemaMismatch(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct ValidationFailure : Error {
  explicit ValidationFailure(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct DegenerateRange : Error {
  explicit DegenerateRange(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct TooSmall : Error {
  explicit TooSmall(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct InvalidLevel : Error {
  explicit InvalidLevel(const std::string& w) : Error(ErrorCode::Usage, w) {}
};
struct NoEvents : Error {
  explicit NoEvents(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct SingularInformation : Error {
  explicit SingularInformation(const std::string& w)
      : Error(ErrorCode::Numeric, w) {}
};
struct NotConverged : Error {
  explicit NotConverged(const std::string& w) : Error(ErrorCode::Numeric, w) {}
};
struct NoComparablePairs : Error {
  explicit NoComparablePairs(const std::string& w)
      : Error(ErrorCode::Data, w) {}
};
struct NumericOverflow : Error {
  explicit NumericOverflow(const std::string& w) : Error(ErrorCode::Numeric, w) {}
};
struct InvalidSE : Error {
  explicit InvalidSE(const std::string& w) : Error(ErrorCode::Numeric, w) {}
};
struct IncompleteGrid : Error {
  explicit IncompleteGrid(const std::string& w) : Error(ErrorCode::Data, w) {}
};
struct NoSignificantBaseline : Error {
  explicit NoSignificantBaseline(const std::string& w)
      : Error(ErrorCode::Data, w) {}
};

}  // namespace dpsurv
