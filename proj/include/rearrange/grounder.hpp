#pragma once

// Resolves noun phrases to entity ids against a symbolic scene.

#include <map>
#include <string>
#include <vector>

#include "rearrange/program.hpp"
#include "rearrange/scene.hpp"

namespace rearrange {

struct GroundingResult {
  std::vector<std::string> ids;  // sorted
  std::vector<Box> boxes;        // parallel to ids
};

class Grounder {
 public:
  virtual ~Grounder() = default;
  // GroundingError when nothing matches; AmbiguityError when a "one"
  // phrase matches more than one entity.
  virtual GroundingResult ground(const FilterNode& node, const Scene& scene) const = 0;
};

// Name match up to plural and case; color must match when given.
class SymbolicGrounder final : public Grounder {
 public:
  GroundingResult ground(const FilterNode& node, const Scene& scene) const override;
};

using Groundings = std::map<FilterNode, std::vector<std::string>>;

Groundings ground_program(const Program& p, const Scene& scene, const Grounder& grounder);

}  // namespace rearrange
