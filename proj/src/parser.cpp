#include "rearrange/parser.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "rearrange/errors.hpp"

namespace rearrange {

namespace {

const std::map<std::string, std::string, std::less<>>& irregular_plurals() {
  static const std::map<std::string, std::string, std::less<>> table = {
      {"boxes", "box"}, {"pluses", "plus"}, {"glasses", "glass"}, {"knives", "knife"}, {"mice", "mouse"}, {"buses", "bus"}};
  return table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string singular(std::string_view noun) {
  if (auto it = irregular_plurals().find(noun); it != irregular_plurals().end()) return it->second;
  if (noun.size() > 3) {
    for (std::string_view tail : {"xes", "sses", "shes", "ches", "zes"}) {
      if (ends_with(noun, tail)) return std::string(noun.substr(0, noun.size() - 2));
    }
  }
  if (noun.size() > 1 && ends_with(noun, "s") && !ends_with(noun, "ss") && !ends_with(noun, "us")) {
    return std::string(noun.substr(0, noun.size() - 1));
  }
  return std::string(noun);
}

std::string plural(std::string_view noun) {
  for (const auto& [p, s] : irregular_plurals()) {
    if (s == noun) return p;
  }
  for (std::string_view tail : {"x", "s", "sh", "ch", "z"}) {
    if (ends_with(noun, tail)) return std::string(noun) + "es";
  }
  return std::string(noun) + "s";
}

bool is_plural(std::string_view noun) { return singular(noun) != noun; }

std::string_view relation_phrase(ConceptKind rel) {
  switch (rel) {
    case ConceptKind::LeftOf: return "to the left of";
    case ConceptKind::RightOf: return "to the right of";
    case ConceptKind::InFrontOf: return "in front of";
    case ConceptKind::Behind: return "behind";
    case ConceptKind::Inside: return "inside";
    case ConceptKind::On3D: return "on top of";
    default: throw ConfigError("relation_phrase: '" + std::string(concept_name(rel)) + "' is not a relation");
  }
}

const std::vector<RelationSynonym>& relation_lexicon() {
  static const std::vector<RelationSynonym> lex = [] {
    std::vector<RelationSynonym> l = {
        {{"to", "the", "left", "of"}, ConceptKind::LeftOf},
        {{"on", "the", "left", "of"}, ConceptKind::LeftOf},
        {{"left", "of"}, ConceptKind::LeftOf},
        {{"to", "the", "right", "of"}, ConceptKind::RightOf},
        {{"on", "the", "right", "of"}, ConceptKind::RightOf},
        {{"right", "of"}, ConceptKind::RightOf},
        {{"in", "front", "of"}, ConceptKind::InFrontOf},
        {{"below"}, ConceptKind::InFrontOf},
        {{"behind"}, ConceptKind::Behind},
        {{"above"}, ConceptKind::Behind},
        {{"on", "top", "of"}, ConceptKind::On3D},
        {{"on"}, ConceptKind::On3D},
        {{"inside"}, ConceptKind::Inside},
        {{"into"}, ConceptKind::Inside},
        {{"in"}, ConceptKind::Inside},
    };
    std::stable_sort(l.begin(), l.end(), [](const auto& a, const auto& b) { return a.words.size() > b.words.size(); });
    return l;
  }();
  return lex;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (ch == ',') {
      flush();
      out.emplace_back(",");
    } else if (ch == '.' || ch == '!') {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

namespace {

class Parser {
 public:
  explicit Parser(std::vector<std::string> toks) : t_(std::move(toks)) {}

  Program run() {
    Program p;
    if (t_.empty()) throw ParseError("parse error: empty instruction");
    clause(p);
    while (!at_end()) {
      const std::size_t mark = i_;
      if (peek() == ",") ++i_;
      if (peek() == "and") ++i_;
      if (i_ == mark || !starts_clause()) fail();
      clause(p);
    }
    return p;
  }

 private:
  bool at_end() const { return i_ >= t_.size(); }
  std::string_view peek(std::size_t ahead = 0) const {
    return i_ + ahead < t_.size() ? std::string_view(t_[i_ + ahead]) : std::string_view();
  }

  [[noreturn]] void fail() const {
    if (at_end()) throw ParseError("parse error: unexpected end of instruction");
    throw ParseError("parse error: unexpected token '" + t_[i_] + "' at position " + std::to_string(i_));
  }

  void expect(std::string_view word) {
    if (peek() != word) fail();
    ++i_;
  }

  bool starts_clause() const {
    const auto w = peek();
    return w == "put" || w == "rearrange" || w == "arrange" || (w == "a" && shape_word(peek(1)));
  }

  static std::optional<ConceptKind> shape_word(std::string_view w) {
    if (w == "circle") return ConceptKind::Circle;
    if (w == "line") return ConceptKind::Line;
    return std::nullopt;
  }

  // Length of the relation phrase starting at the cursor, if any.
  std::optional<RelationSynonym> relation_here() const {
    for (const auto& syn : relation_lexicon()) {
      bool match = true;
      for (std::size_t k = 0; k < syn.words.size() && match; ++k) match = peek(k) == syn.words[k];
      if (match) return syn;
    }
    return std::nullopt;
  }

  ConceptKind relation() {
    const auto syn = relation_here();
    if (!syn) fail();
    i_ += syn->words.size();
    return syn->relation;
  }

  bool stop_word() const { return at_end() || peek() == "," || peek() == "and" || relation_here().has_value(); }

  FilterNode noun_phrase() {
    std::string_view det;
    if (peek() == "the" || peek() == "a" || peek() == "an" || peek() == "all") det = t_[i_++];
    std::vector<std::string> words;
    while (!stop_word()) {
      if (words.size() == 2) fail();
      words.push_back(t_[i_++]);
    }
    if (words.empty()) fail();
    FilterNode f;
    f.noun = singular(words.back());
    if (words.size() == 2) f.color = words[0];
    f.quantifier = (det == "all" || is_plural(words.back())) ? Quantifier::All : Quantifier::One;
    return f;
  }

  // "in a circle", "into a line"
  std::optional<ConceptKind> shape_slot() const {
    if ((peek() == "in" || peek() == "into") && peek(1) == "a") {
      if (auto s = shape_word(peek(2))) return s;
    }
    return std::nullopt;
  }

  std::optional<ShapeConstraint> shape_constraint() {
    if (!relation_here()) return std::nullopt;
    const ConceptKind rel = relation();
    return ShapeConstraint{rel, noun_phrase()};
  }

  void clause(Program& p) {
    if (peek() == "a") {
      ++i_;
      const auto shape = shape_word(peek());
      if (!shape) fail();
      ++i_;
      expect("of");
      MultiAryNode m{*shape, noun_phrase(), std::nullopt};
      m.constraint = shape_constraint();
      p.goals.push_back(m);
      return;
    }
    if (peek() == "rearrange" || peek() == "arrange") {
      ++i_;
      FilterNode members = noun_phrase();
      const auto shape = shape_slot();
      if (!shape) fail();
      i_ += 3;
      MultiAryNode m{*shape, members, std::nullopt};
      m.constraint = shape_constraint();
      p.goals.push_back(m);
      return;
    }
    expect("put");
    const FilterNode subject = noun_phrase();
    if (const auto shape = shape_slot()) {
      i_ += 3;
      MultiAryNode m{*shape, subject, std::nullopt};
      m.constraint = shape_constraint();
      p.goals.push_back(m);
      return;
    }
    const ConceptKind rel = relation();
    p.goals.push_back(BinaryNode{rel, subject, noun_phrase()});
    // Conjuncts sharing the subject: ", REL NP", "and REL NP", ", and REL NP".
    for (;;) {
      const std::size_t mark = i_;
      if (peek() == ",") ++i_;
      if (peek() == "and") ++i_;
      if (i_ == mark || !relation_here()) {
        i_ = mark;
        return;
      }
      const ConceptKind r = relation();
      p.goals.push_back(BinaryNode{r, subject, noun_phrase()});
    }
  }

  std::vector<std::string> t_;
  std::size_t i_ = 0;
};

std::string join_clauses(const std::vector<std::string>& parts) {
  if (parts.size() == 1) return parts[0];
  if (parts.size() == 2) return parts[0] + " and " + parts[1];
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? ", and " : ", ";
    out += parts[i];
  }
  return out;
}

}  // namespace

Program parse(std::string_view instruction) {
  Program p = Parser(tokenize(instruction)).run();
  validate(p);
  return p;
}

std::string render(const Program& p) {
  validate(p);
  std::vector<std::string> clauses;
  for (std::size_t i = 0; i < p.goals.size();) {
    if (const auto* m = std::get_if<MultiAryNode>(&p.goals[i])) {
      std::string c = "rearrange " + describe(m->members) + " in a " + std::string(concept_name(m->shape));
      if (m->constraint) c += " " + std::string(relation_phrase(m->constraint->relation)) + " " + describe(m->constraint->referent);
      clauses.push_back(c);
      ++i;
      continue;
    }
    const auto& first = std::get<BinaryNode>(p.goals[i]);
    std::vector<std::string> relations;
    std::size_t j = i;
    for (; j < p.goals.size(); ++j) {
      const auto* b = std::get_if<BinaryNode>(&p.goals[j]);
      if (!b || b->subject != first.subject) break;
      relations.push_back(std::string(relation_phrase(b->relation)) + " " + describe(b->referent));
    }
    clauses.push_back("put " + describe(first.subject) + " " + join_clauses(relations));
    i = j;
  }
  return join_clauses(clauses);
}

}  // namespace rearrange
