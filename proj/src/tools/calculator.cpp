#include "nat/tools/calculator.hpp"

#include <cctype>
#include <memory>
#include <stdexcept>

namespace nat::tools {

namespace mp = boost::multiprecision;
using Int = mp::cpp_int;

namespace {

constexpr int kMaxDepth = 256;
constexpr unsigned kMaxExponent = 400;  // 2^400 > 10^100, so larger |exponents| always overflow

struct Failure {
  CalcError error;
};

[[noreturn]] void fail(CalcErrorKind kind, std::string message) { throw Failure{{kind, std::move(message)}}; }

// cpp_int's string constructor reads a leading 0 as an octal prefix.
Int decimal_int(const std::string& digits) {
  auto first = digits.find_first_not_of('0');
  return first == std::string::npos ? Int(0) : Int(digits.substr(first));
}

const Int& limit_int() {
  static const Int limit = mp::pow(Int(10), 100);
  return limit;
}

void check_magnitude(const Rational& v) {
  const Int& num = mp::numerator(v);
  const Int& den = mp::denominator(v);
  if (mp::abs(num) > limit_int() * den || den > limit_int()) fail(CalcErrorKind::overflow, "overflow");
}

struct Node {
  enum class Kind { number, negate, add, subtract, multiply, divide, power } kind;
  Rational value;
  std::unique_ptr<Node> lhs;
  std::unique_ptr<Node> rhs;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make_binary(Node::Kind kind, NodePtr lhs, NodePtr rhs) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto node = expr();
    skip_space();
    if (pos_ < text_.size()) unexpected();
    return node;
  }

private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  [[noreturn]] void unexpected() {
    std::string what = pos_ < text_.size() ? std::string("unexpected '") + text_[pos_] + "'" : "unexpected end of input";
    fail(CalcErrorKind::syntax, "syntax error at column " + std::to_string(pos_ + 1) + ": " + what);
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxDepth) {
        fail(CalcErrorKind::syntax,
             "syntax error at column " + std::to_string(parser.pos_ + 1) + ": expression nested too deeply");
      }
    }
    ~DepthGuard() { --parser.depth_; }
    Parser& parser;
  };

  NodePtr expr() {
    auto lhs = term();
    for (char c = peek(); c == '+' || c == '-'; c = peek()) {
      ++pos_;
      lhs = make_binary(c == '+' ? Node::Kind::add : Node::Kind::subtract, std::move(lhs), term());
    }
    return lhs;
  }

  NodePtr term() {
    auto lhs = unary();
    for (char c = peek(); c == '*' || c == '/'; c = peek()) {
      ++pos_;
      lhs = make_binary(c == '*' ? Node::Kind::multiply : Node::Kind::divide, std::move(lhs), unary());
    }
    return lhs;
  }

  NodePtr negation(NodePtr (Parser::*operand)()) {
    DepthGuard guard(*this);
    ++pos_;
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::negate;
    n->lhs = (this->*operand)();
    return n;
  }

  NodePtr unary() {
    if (peek() == '-') return negation(&Parser::unary);
    return power();
  }

  NodePtr exponent() {
    if (peek() == '-') return negation(&Parser::exponent);
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (peek() == '^') {
      DepthGuard guard(*this);
      ++pos_;
      return make_binary(Node::Kind::power, std::move(base), exponent());
    }
    return base;
  }

  NodePtr primary() {
    char c = peek();
    if (c == '(') {
      DepthGuard guard(*this);
      ++pos_;
      auto inner = expr();
      if (peek() != ')') unexpected();
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    unexpected();
  }

  NodePtr number() {
    std::size_t start = pos_;
    std::string digits;
    std::size_t frac = 0;
    bool seen_dot = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits.push_back(c);
        if (seen_dot) ++frac;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
      } else {
        break;
      }
      ++pos_;
    }
    if (digits.empty()) {
      pos_ = start;
      unexpected();
    }
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::number;
    n->value = Rational(decimal_int(digits), mp::pow(Int(10), static_cast<unsigned>(frac)));
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

Rational power(const Rational& base, const Rational& exponent) {
  if (mp::denominator(exponent) != 1) fail(CalcErrorKind::non_integer_exponent, "non-integer exponent unsupported");
  const Int& e = mp::numerator(exponent);
  if (base == 0) {
    if (e < 0) fail(CalcErrorKind::division_by_zero, "division by zero");
    return e == 0 ? Rational(1) : Rational(0);
  }
  if (mp::abs(base) == 1) {
    bool odd = mp::bit_test(mp::abs(e), 0);
    return base < 0 && odd ? Rational(-1) : Rational(1);
  }
  if (mp::abs(e) > kMaxExponent) fail(CalcErrorKind::overflow, "overflow");
  auto n = static_cast<unsigned>(mp::abs(e));
  Int num = mp::pow(mp::numerator(base), n);
  Int den = mp::pow(mp::denominator(base), n);
  if (e >= 0) return Rational(num, den);
  // keep the denominator positive
  return num < 0 ? Rational(-den, -num) : Rational(den, num);
}

Rational evaluate(const Node& node) {
  Rational result;
  switch (node.kind) {
    case Node::Kind::number:
      result = node.value;
      break;
    case Node::Kind::negate:
      result = -evaluate(*node.lhs);
      break;
    default: {
      Rational lhs = evaluate(*node.lhs);
      Rational rhs = evaluate(*node.rhs);
      switch (node.kind) {
        case Node::Kind::add: result = lhs + rhs; break;
        case Node::Kind::subtract: result = lhs - rhs; break;
        case Node::Kind::multiply: result = lhs * rhs; break;
        case Node::Kind::divide:
          if (rhs == 0) fail(CalcErrorKind::division_by_zero, "division by zero");
          result = lhs / rhs;
          break;
        case Node::Kind::power: result = power(lhs, rhs); break;
        default: break;
      }
    }
  }
  check_magnitude(result);
  return result;
}

// Decimal digits of |n| with a point inserted `frac` places from the right.
std::string place_point(const Int& n, std::size_t frac) {
  std::string digits = Int(mp::abs(n)).str();
  if (frac == 0) return digits;
  if (digits.size() <= frac) digits.insert(0, frac - digits.size() + 1, '0');
  digits.insert(digits.size() - frac, 1, '.');
  return digits;
}

std::string strip_trailing_zeros(std::string s) {
  if (s.find('.') == std::string::npos) return s;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

const Rational& calc_magnitude_limit() {
  static const Rational limit(limit_int());
  return limit;
}

CalcResult calc_evaluate(std::string_view expression) {
  try {
    Parser parser(expression);
    auto ast = parser.parse();
    return evaluate(*ast);
  } catch (const Failure& f) {
    return f.error;
  } catch (const std::exception& e) {
    return CalcError{CalcErrorKind::syntax, std::string("evaluation failed: ") + e.what()};
  }
}

std::string six_significant_digits(const Rational& value) {
  if (value == 0) return "0";
  const bool negative = value < 0;
  const Rational v = mp::abs(value);

  auto pow10 = [](int k) {
    return k >= 0 ? Rational(mp::pow(Int(10), static_cast<unsigned>(k)))
                  : Rational(Int(1), mp::pow(Int(10), static_cast<unsigned>(-k)));
  };
  // exponent of the leading digit: 10^e <= v < 10^(e+1)
  int e = static_cast<int>(mp::numerator(v).str().size()) - static_cast<int>(mp::denominator(v).str().size());
  while (v < pow10(e)) --e;
  while (v >= pow10(e + 1)) ++e;

  Rational scaled = v * pow10(5 - e);
  Int mantissa = mp::numerator(scaled) / mp::denominator(scaled);
  if ((scaled - Rational(mantissa)) * 2 >= 1) ++mantissa;
  if (mantissa == 1000000) {
    mantissa = 100000;
    ++e;
  }

  std::string out = negative ? "-" : "";
  if (e < -4 || e >= 6) {
    out += strip_trailing_zeros(place_point(mantissa, 5));
    out += e < 0 ? "e-" : "e+";
    std::string exp = std::to_string(e < 0 ? -e : e);
    if (exp.size() < 2) exp.insert(0, "0");
    out += exp;
  } else {
    out += strip_trailing_zeros(place_point(mantissa, static_cast<std::size_t>(5 - e)));
  }
  return out;
}

std::string render_exact(const Rational& value) {
  const Int& num = mp::numerator(value);
  const Int& den = mp::denominator(value);
  const std::string sign = num < 0 ? "-" : "";
  if (den == 1) return num.str();

  unsigned twos = 0;
  unsigned fives = 0;
  Int rest = den;
  while (rest % 2 == 0) rest /= 2, ++twos;
  while (rest % 5 == 0) rest /= 5, ++fives;
  if (rest == 1) {
    unsigned places = std::max(twos, fives);
    Int scaled = num * mp::pow(Int(10), places) / den;
    return sign + place_point(scaled, places);
  }
  return num.str() + "/" + den.str() + " (" + six_significant_digits(value) + ")";
}

ObservationResult calc_eval(std::string_view expression) {
  auto result = calc_evaluate(expression);
  if (!result.ok()) return ObservationResult::error(result.error().message);
  return ObservationResult::ok(render_exact(result.value()));
}

}  // namespace nat::tools
