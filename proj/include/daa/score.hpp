#pragma once

// Aggregation of fit results into archetype x target score matrices.
// Similarity is 1 minus the dissimilarity normalized by the row (per
// archetype) maximum across targets, so each row has at least one exact
// zero; simplicity applies the same rule to complexity. The raw pair
// (dissimilarity, complexity) always travels alongside.

#include "daa/archetypes.hpp"
#include "daa/common.hpp"
#include "daa/train.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace daa {

struct FitCell {
  double dissimilarity = 0.0;  // test MSE
  double complexity = 0.0;
};

struct ScoreMatrix {
  std::vector<std::string> archetypes;  // row order
  std::vector<std::string> targets;     // column order
  Mat dissimilarity, complexity, similarity, simplicity;

  nlohmann::json to_json() const;
  static ScoreMatrix from_json(const nlohmann::json& j);
  std::string to_csv() const;  // long format: archetype,target,dissimilarity,...
};

/// Errors: IncompleteGrid naming every missing (archetype, target) pair.
ScoreMatrix build_matrix(const std::vector<std::string>& archetypes,
                         const std::vector<std::string>& targets,
                         const std::map<std::pair<std::string, std::string>, FitCell>& fits);

/// Argmax of similarity over archetypes; exact ties break toward higher
/// simplicity, then toward the earlier row.
std::string best_archetype(const ScoreMatrix& m, const std::string& target);

struct MappedManifold {
  std::vector<Vec> points;
  std::string archetype;
  std::string target;
};

/// Designed invariant manifold pushed through the fitted map, reported in
/// the target's original coordinates (standardize, flow, de-standardize).
MappedManifold map_manifold(const FitResult& fit, const SystemSpec& archetype, int n_points,
                            const std::string& archetype_name = "", const std::string& target_name = "");

}  // namespace daa
