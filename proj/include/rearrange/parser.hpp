#pragma once

// Template-grammar parser from instructions to Programs.
//
//   put the X REL the Y[, REL the Z][, and REL the W]
//   put A REL1 B, put C REL2 D, and put E REL3 F
//   rearrange all X in a SHAPE [REL the Y]
//   put all X in a SHAPE [REL the Y]
//   a SHAPE of X [REL the Y]
//
// Determiners are optional; a noun phrase is an optional color word
// followed by a noun. Nouns and colors are open classes.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rearrange/program.hpp"

namespace rearrange {

// Plural handling shared with the grounder.
std::string singular(std::string_view noun);
std::string plural(std::string_view noun);
bool is_plural(std::string_view noun);

// Canonical phrase for a binary relation ("to the left of", "behind", ...).
std::string_view relation_phrase(ConceptKind rel);

// Recognized synonyms, longest first.
struct RelationSynonym {
  std::vector<std::string_view> words;
  ConceptKind relation;
};
const std::vector<RelationSynonym>& relation_lexicon();

std::vector<std::string> tokenize(std::string_view text);

// Throws ParseError naming the first unconsumed token.
Program parse(std::string_view instruction);

// Canonical English for a program; parse(render(p)) == p.
std::string render(const Program& p);

}  // namespace rearrange
