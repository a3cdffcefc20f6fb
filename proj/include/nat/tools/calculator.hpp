#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

#include "nat/tools/observation.hpp"

namespace nat::tools {

using Rational = boost::multiprecision::cpp_rational;

enum class CalcErrorKind { syntax, division_by_zero, non_integer_exponent, overflow };

struct CalcError {
  CalcErrorKind kind;
  std::string message;
};

/// Outcome of evaluating an arithmetic expression: an exact value or an error.
class CalcResult {
public:
  CalcResult(Rational value) : value_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  CalcResult(CalcError error) : error_(std::move(error)) {}  // NOLINT(google-explicit-constructor)

  [[nodiscard]] bool ok() const noexcept { return value_.has_value(); }
  [[nodiscard]] const Rational& value() const { return *value_; }
  [[nodiscard]] const CalcError& error() const { return *error_; }

private:
  std::optional<Rational> value_;
  std::optional<CalcError> error_;
};

/// Values (and reduced denominators) above this bound raise "overflow".
const Rational& calc_magnitude_limit();

/// Evaluates `expression` over exact rationals.
///
/// Grammar, loosest to tightest binding:
///   expr     := term (('+' | '-') term)*
///   term     := unary (('*' | '/') unary)*
///   unary    := '-' unary | power
///   power    := primary ('^' exponent)?
///   exponent := '-' exponent | power          (so ^ is right-associative)
///   primary  := decimal | '(' expr ')'
///
/// Evaluation is post-order, left operand first; the first failing node
/// determines the error. Never throws.
CalcResult calc_evaluate(std::string_view expression);

/// Integer if integral, else the shortest terminating decimal, else
/// "p/q (d.ddddd)" with a six-significant-digit approximation.
std::string render_exact(const Rational& value);

/// Six significant digits in printf "%g" layout, computed exactly.
std::string six_significant_digits(const Rational& value);

/// The calculator tool: calc_evaluate + render_exact, errors as tool errors.
ObservationResult calc_eval(std::string_view expression);

}  // namespace nat::tools
