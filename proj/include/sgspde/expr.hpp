#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sgspde/grid.hpp"

namespace sgspde {

struct ExprVars {
  double t = 0;
  Point x;
  Point xi;
  double u = 0;
};

// Real arithmetic over t, u, x, x1..x3, xi, xi1..xi3 (also written with the Greek letter), the brackets <x>, <xi>
// (also with angle brackets), pi, + - * / ^, and sin cos tan exp log sqrt abs tanh atan pow min max.
class Expression {
 public:
  struct Node;

  // allowed: subset of {"t", "u", "x", "xi"}; other identifiers are rejected with their position.
  static Expression parse(const std::string& text, const std::set<std::string>& allowed = {"t", "u", "x", "xi"});

  double operator()(const ExprVars& v) const;
  bool uses(const std::string& group) const { return used_.count(group) > 0; }
  // Largest 1-based component index referenced by x or xi variables; 0 when none.
  int max_component() const { return max_component_; }
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
  std::set<std::string> used_;
  int max_component_ = 0;
};

}  // namespace sgspde
