#include "sgspde/expr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "sgspde/errors.hpp"

namespace sgspde {

struct Expression::Node {
  enum class Kind { Number, Time, Value, Space, Frequency, SpaceBracket, FrequencyBracket, Negate, Binary, Call };
  Kind kind = Kind::Number;
  double number = 0;
  int component = 0;
  char op = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

const std::string kLeftAngle = "\xE2\x9F\xA8";   // U+27E8
const std::string kRightAngle = "\xE2\x9F\xA9";  // U+27E9
const std::string kXi = "\xCE\xBE";              // U+03BE

std::shared_ptr<Expression::Node> make(Kind k) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  return n;
}

class Parser {
 public:
  Parser(const std::string& text, const std::set<std::string>& allowed) : s_(text), allowed_(allowed) {}

  NodePtr run() {
    NodePtr e = expression();
    skip();
    if (pos_ < s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

  std::set<std::string> used;
  int max_component = 0;

 private:
  const std::string& s_;
  const std::set<std::string>& allowed_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < s_.size(); ++i) {
      if (s_[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(s_[i]) & 0xC0) != 0x80) {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(msg, pos_); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool starts(const std::string& tok) const { return s_.compare(pos_, tok.size(), tok) == 0; }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr binary(char op, NodePtr a, NodePtr b) {
    auto n = make(Kind::Binary);
    n->op = op;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    while (true) {
      if (accept('+')) lhs = binary('+', lhs, term());
      else if (accept('-')) lhs = binary('-', lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (accept('*')) lhs = binary('*', lhs, unary());
      else if (accept('/')) lhs = binary('/', lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = make(Kind::Negate);
      n->args = {unary()};
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return binary('^', base, unary());
    return base;
  }

  std::string identifier() {
    std::string id;
    if (starts(kXi)) {
      pos_ += kXi.size();
      id = "xi";
    }
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) id += s_[pos_++];
    return id;
  }

  void require(const std::string& group, std::size_t at) {
    if (!allowed_.count(group)) fail("variable group '" + group + "' is not allowed here", at);
    used.insert(group);
  }

  NodePtr bracket(std::size_t at, bool unicode) {
    skip();
    const std::size_t id_at = pos_;
    const std::string id = identifier();
    if (id != "x" && id != "xi") fail("expected x or xi inside a bracket", id_at);
    require(id, id_at);
    skip();
    if (unicode ? starts(kRightAngle) : starts(">")) pos_ += unicode ? kRightAngle.size() : 1;
    else fail("unterminated bracket", at);
    return make(id == "x" ? Kind::SpaceBracket : Kind::FrequencyBracket);
  }

  NodePtr primary() {
    skip();
    const std::size_t at = pos_;
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    if (accept('(')) {
      NodePtr e = expression();
      expect(')');
      return e;
    }
    if (s_[pos_] == '<') {
      ++pos_;
      return bracket(at, false);
    }
    if (starts(kLeftAngle)) {
      pos_ += kLeftAngle.size();
      return bracket(at, true);
    }
    if (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = make(Kind::Number);
      n->number = v;
      return n;
    }
    const std::string id = identifier();
    if (id.empty()) fail("unexpected '" + std::string(1, s_[at]) + "'", at);
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') return call(id, at);
    return variable(id, at);
  }

  NodePtr call(const std::string& id, std::size_t at) {
    static const std::set<std::string> unary_fns = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "atan"};
    static const std::set<std::string> binary_fns = {"pow", "min", "max"};
    const std::size_t arity = unary_fns.count(id) ? 1 : binary_fns.count(id) ? 2 : 0;
    if (arity == 0) fail("unknown function '" + id + "'", at);
    expect('(');
    auto n = make(Kind::Call);
    n->fn = id;
    n->args.push_back(expression());
    while (accept(',')) n->args.push_back(expression());
    expect(')');
    if (n->args.size() != arity) fail("'" + id + "' takes " + std::to_string(arity) + " argument(s)", at);
    return n;
  }

  NodePtr variable(const std::string& id, std::size_t at) {
    if (id == "pi") {
      auto n = make(Kind::Number);
      n->number = std::numbers::pi;
      return n;
    }
    if (id == "t") {
      require("t", at);
      return make(Kind::Time);
    }
    if (id == "u") {
      require("u", at);
      return make(Kind::Value);
    }
    for (const std::string group : {"xi", "x"}) {
      if (id.rfind(group, 0) != 0) continue;
      const std::string rest = id.substr(group.size());
      if (!rest.empty() && !(rest.size() == 1 && rest[0] >= '1' && rest[0] <= '3')) continue;
      require(group, at);
      auto n = make(group == "x" ? Kind::Space : Kind::Frequency);
      n->component = rest.empty() ? 0 : rest[0] - '1';
      max_component = std::max(max_component, n->component + 1);
      return n;
    }
    fail("unknown identifier '" + id + "'", at);
  }
};

double component(const Point& p, int c) {
  if (c >= p.size()) throw ArgumentError("expression references a missing coordinate");
  return p[c];
}

double eval(const Expression::Node& n, const ExprVars& v) {
  switch (n.kind) {
    case Kind::Number: return n.number;
    case Kind::Time: return v.t;
    case Kind::Value: return v.u;
    case Kind::Space: return component(v.x, n.component);
    case Kind::Frequency: return component(v.xi, n.component);
    case Kind::SpaceBracket: return bracket(v.x);
    case Kind::FrequencyBracket: return bracket(v.xi);
    case Kind::Negate: return -eval(*n.args[0], v);
    case Kind::Binary: {
      const double a = eval(*n.args[0], v), b = eval(*n.args[1], v);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return a / b;
        default: return std::pow(a, b);
      }
    }
    case Kind::Call: {
      const double a = eval(*n.args[0], v);
      if (n.fn == "sin") return std::sin(a);
      if (n.fn == "cos") return std::cos(a);
      if (n.fn == "tan") return std::tan(a);
      if (n.fn == "exp") return std::exp(a);
      if (n.fn == "log") return std::log(a);
      if (n.fn == "sqrt") return std::sqrt(a);
      if (n.fn == "abs") return std::abs(a);
      if (n.fn == "tanh") return std::tanh(a);
      if (n.fn == "atan") return std::atan(a);
      const double b = eval(*n.args[1], v);
      if (n.fn == "pow") return std::pow(a, b);
      if (n.fn == "min") return std::min(a, b);
      return std::max(a, b);
    }
  }
  return 0;
}

}  // namespace

Expression Expression::parse(const std::string& text, const std::set<std::string>& allowed) {
  Parser p(text, allowed);
  Expression e;
  e.root_ = p.run();
  e.text_ = text;
  e.used_ = std::move(p.used);
  e.max_component_ = p.max_component;
  return e;
}

double Expression::operator()(const ExprVars& v) const {
  if (!root_) throw ArgumentError("empty expression");
  return eval(*root_, v);
}

}  // namespace sgspde
