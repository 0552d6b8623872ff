#pragma once

#include <optional>
#include <string>
#include <vector>

#include "planarcoh/cohomology.hpp"

#include <json.hpp>

namespace pcoh {

struct SeparatrixSpec {
  std::string id;
  std::string desc;  // "y=1", "x=0" or "seed:x,y"
  double F_level = 0.0;
  std::vector<std::string> inseparable_from;
};

struct TransversalSpec {
  std::string separatrix;
  std::string kind = "level-set";  // level-set | vertical-segment | horizontal-segment
  std::string expr;                // defining function for level sets
  double level = 0.0;
  Point2 anchor;
  std::optional<Box> guard;
};

/// Serializable description of a model: either a registry name or the full
/// explicit block. schema is versioned so downstream tooling can bail early.
struct FieldSpec {
  int schema = 1;
  std::string model;  // "ex51:2" etc.; expands to everything below
  std::string name = "field";
  std::string fx, fy;
  std::string F, G;
  std::vector<SeparatrixSpec> separatrices;
  std::vector<TransversalSpec> transversals;
  Box box;
  std::vector<std::string> degenerate;  // separatrix ids where dF vanishes
};

FieldSpec specFromJson(const nlohmann::json& j);
nlohmann::json specToJson(const FieldSpec& s);

/// Expands a registry model reference into the explicit block; no-op for
/// fully explicit specs.
FieldSpec resolveSpec(FieldSpec s);

/// Parsed, validated, ready-to-use bundle.
struct ModelContext {
  FieldSpec spec;
  PlanarField field;
  HamiltonianPair ham;
  DerivedPair dp;
  FoliationChart chart;
};

ModelContext buildContext(FieldSpec spec, std::uint64_t seed = 0x5eedULL);

}  // namespace pcoh
