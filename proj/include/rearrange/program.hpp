#pragma once

// Program trees over the concept DSL: Filter leaves, binary relation goals
// and multi-ary shape goals.
//
// S-expression form:
//   (filter cube cyan)  (filter-all cube)
//   (binary behind (filter cube cyan) (filter cylinder red))
//   (multiary circle (filter-all cube) (inside (filter plate)))
//   (and GOAL GOAL ...)    for more than one goal

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rearrange/ebm.hpp"

namespace rearrange {

enum class Quantifier { One, All };

struct FilterNode {
  std::string noun;  // singular form
  std::optional<std::string> color;
  Quantifier quantifier = Quantifier::One;

  friend auto operator<=>(const FilterNode&, const FilterNode&) = default;
};

struct BinaryNode {
  ConceptKind relation = ConceptKind::LeftOf;
  FilterNode subject;
  FilterNode referent;

  friend bool operator==(const BinaryNode&, const BinaryNode&) = default;
};

struct ShapeConstraint {
  ConceptKind relation = ConceptKind::Inside;
  FilterNode referent;

  friend bool operator==(const ShapeConstraint&, const ShapeConstraint&) = default;
};

struct MultiAryNode {
  ConceptKind shape = ConceptKind::Circle;
  FilterNode members;
  std::optional<ShapeConstraint> constraint;

  friend bool operator==(const MultiAryNode&, const MultiAryNode&) = default;
};

using Goal = std::variant<BinaryNode, MultiAryNode>;

struct Program {
  std::vector<Goal> goals;

  friend bool operator==(const Program&, const Program&) = default;
};

// Throws ValidationError when a relation is not binary, a shape is not
// Circle/Line, or the program is empty.
void validate(const Program& p);

std::string to_sexpr(const FilterNode& f);
std::string to_sexpr(const Goal& g);
std::string to_sexpr(const Program& p);

// ParseError on malformed input.
Program program_from_sexpr(std::string_view text);

// Every distinct FilterNode in the program, in first-appearance order.
std::vector<FilterNode> filters_of(const Program& p);

// Surface phrase used when rendering a noun phrase: "the red cube",
// "all red cubes".
std::string describe(const FilterNode& f);

}  // namespace rearrange
