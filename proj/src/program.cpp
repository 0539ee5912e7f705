#include "rearrange/program.hpp"

#include <algorithm>
#include <cctype>
#include <memory>

#include "rearrange/errors.hpp"
#include "rearrange/parser.hpp"

namespace rearrange {

void validate(const Program& p) {
  if (p.goals.empty()) throw ValidationError("program has no goals");
  for (const Goal& g : p.goals) {
    if (const auto* b = std::get_if<BinaryNode>(&g)) {
      if (!is_binary(b->relation)) {
        throw ValidationError("binary goal with non-binary concept '" + std::string(concept_name(b->relation)) + "'");
      }
    } else {
      const auto& m = std::get<MultiAryNode>(g);
      if (m.shape != ConceptKind::Circle && m.shape != ConceptKind::Line) {
        throw ValidationError("shape goal must be circle or line, got '" + std::string(concept_name(m.shape)) + "'");
      }
      if (m.constraint && !is_binary(m.constraint->relation)) throw ValidationError("shape constraint must be binary");
    }
  }
}

std::string to_sexpr(const FilterNode& f) {
  std::string out = f.quantifier == Quantifier::All ? "(filter-all " : "(filter ";
  out += f.noun;
  if (f.color) out += " " + *f.color;
  return out + ")";
}

std::string to_sexpr(const Goal& g) {
  if (const auto* b = std::get_if<BinaryNode>(&g)) {
    return "(binary " + std::string(concept_name(b->relation)) + " " + to_sexpr(b->subject) + " " +
           to_sexpr(b->referent) + ")";
  }
  const auto& m = std::get<MultiAryNode>(g);
  std::string out = "(multiary " + std::string(concept_name(m.shape)) + " " + to_sexpr(m.members);
  if (m.constraint) {
    out += " (" + std::string(concept_name(m.constraint->relation)) + " " + to_sexpr(m.constraint->referent) + ")";
  }
  return out + ")";
}

std::string to_sexpr(const Program& p) {
  if (p.goals.size() == 1) return to_sexpr(p.goals[0]);
  std::string out = "(and";
  for (const Goal& g : p.goals) out += " " + to_sexpr(g);
  return out + ")";
}

namespace {

struct SNode {
  std::string atom;
  std::vector<SNode> items;
  bool is_list = false;
};

class SReader {
 public:
  explicit SReader(std::string_view t) : text_(t) {}

  SNode read() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    if (text_[pos_] == ')') fail("unexpected ')'");
    if (text_[pos_] == '(') {
      ++pos_;
      SNode list;
      list.is_list = true;
      for (;;) {
        skip();
        if (pos_ >= text_.size()) fail("unterminated list");
        if (text_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    return SNode{std::string(text_.substr(start, pos_ - start)), {}, false};
  }

  void expect_end() {
    skip();
    if (pos_ != text_.size()) fail("trailing input");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("program: " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

[[noreturn]] void bad(const std::string& what) { throw ParseError("program: " + what); }

const std::string& head_of(const SNode& n) {
  if (!n.is_list || n.items.empty() || n.items[0].is_list) bad("expected a (head ...) list");
  return n.items[0].atom;
}

const std::string& atom(const SNode& n) {
  if (n.is_list) bad("expected an atom");
  return n.atom;
}

FilterNode read_filter(const SNode& n) {
  const std::string& h = head_of(n);
  if (h != "filter" && h != "filter-all") bad("expected filter, got '" + h + "'");
  if (n.items.size() < 2 || n.items.size() > 3) bad("filter takes a noun and an optional color");
  FilterNode f;
  f.quantifier = h == "filter-all" ? Quantifier::All : Quantifier::One;
  f.noun = atom(n.items[1]);
  if (n.items.size() == 3) f.color = atom(n.items[2]);
  return f;
}

ConceptKind read_concept(const SNode& n) {
  const auto k = concept_from_name(atom(n));
  if (!k) bad("unknown concept '" + n.atom + "'");
  return *k;
}

Goal read_goal(const SNode& n) {
  const std::string& h = head_of(n);
  if (h == "binary") {
    if (n.items.size() != 4) bad("binary takes a relation and two filters");
    return BinaryNode{read_concept(n.items[1]), read_filter(n.items[2]), read_filter(n.items[3])};
  }
  if (h == "multiary") {
    if (n.items.size() < 3 || n.items.size() > 4) bad("multiary takes a shape, members and an optional constraint");
    MultiAryNode m{read_concept(n.items[1]), read_filter(n.items[2]), std::nullopt};
    if (n.items.size() == 4) {
      const SNode& c = n.items[3];
      if (!c.is_list || c.items.size() != 2) bad("constraint must be (relation filter)");
      m.constraint = ShapeConstraint{read_concept(c.items[0]), read_filter(c.items[1])};
    }
    return m;
  }
  bad("unknown goal '" + h + "'");
}

}  // namespace

Program program_from_sexpr(std::string_view text) {
  SReader r(text);
  const SNode root = r.read();
  r.expect_end();
  Program p;
  if (head_of(root) == "and") {
    for (std::size_t i = 1; i < root.items.size(); ++i) p.goals.push_back(read_goal(root.items[i]));
  } else {
    p.goals.push_back(read_goal(root));
  }
  try {
    validate(p);
  } catch (const ValidationError& e) {
    bad(e.what());
  }
  return p;
}

std::vector<FilterNode> filters_of(const Program& p) {
  std::vector<FilterNode> out;
  auto add = [&](const FilterNode& f) {
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  };
  for (const Goal& g : p.goals) {
    if (const auto* b = std::get_if<BinaryNode>(&g)) {
      add(b->subject);
      add(b->referent);
    } else {
      const auto& m = std::get<MultiAryNode>(g);
      add(m.members);
      if (m.constraint) add(m.constraint->referent);
    }
  }
  return out;
}

std::string describe(const FilterNode& f) {
  const std::string color = f.color ? *f.color + " " : "";
  if (f.quantifier == Quantifier::All) return "all " + color + plural(f.noun);
  return "the " + color + f.noun;
}

}  // namespace rearrange
