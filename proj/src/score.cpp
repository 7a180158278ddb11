#include "daa/score.hpp"

#include "daa/sim.hpp"

#include <sstream>

namespace daa {

namespace {

// rows with a zero maximum are all-equal rows: every entry is its own
// maximum, so the normalized score is 1 and the inverted score is 0
Mat invert_row_normalized(const Mat& raw) {
  Mat out(raw.rows(), raw.cols());
  for (int r = 0; r < raw.rows(); ++r) {
    const double mx = raw.row(r).maxCoeff();
    for (int c = 0; c < raw.cols(); ++c)
      out(r, c) = (mx > 0.0) ? 1.0 - raw(r, c) / mx : 0.0;
  }
  return out;
}

}  // namespace

ScoreMatrix build_matrix(const std::vector<std::string>& archetypes,
                         const std::vector<std::string>& targets,
                         const std::map<std::pair<std::string, std::string>, FitCell>& fits) {
  if (archetypes.empty() || targets.empty())
    fail(Err::InvalidSpec, "score matrix needs at least one archetype and one target");

  std::vector<std::string> missing;
  for (const auto& a : archetypes)
    for (const auto& t : targets)
      if (!fits.count({a, t})) missing.push_back(a + "/" + t);
  if (!missing.empty()) {
    std::ostringstream os;
    os << "missing fits:";
    for (const auto& m : missing) os << ' ' << m;
    fail(Err::IncompleteGrid, os.str());
  }

  ScoreMatrix m;
  m.archetypes = archetypes;
  m.targets = targets;
  const int A = static_cast<int>(archetypes.size());
  const int T = static_cast<int>(targets.size());
  m.dissimilarity.resize(A, T);
  m.complexity.resize(A, T);
  for (int r = 0; r < A; ++r)
    for (int c = 0; c < T; ++c) {
      const auto& cell = fits.at({archetypes[r], targets[c]});
      m.dissimilarity(r, c) = cell.dissimilarity;
      m.complexity(r, c) = cell.complexity;
    }
  m.similarity = invert_row_normalized(m.dissimilarity);
  m.simplicity = invert_row_normalized(m.complexity);
  return m;
}

std::string best_archetype(const ScoreMatrix& m, const std::string& target) {
  int col = -1;
  for (size_t c = 0; c < m.targets.size(); ++c)
    if (m.targets[c] == target) col = static_cast<int>(c);
  if (col < 0) fail(Err::InvalidSpec, "unknown target '" + target + "'");

  int best = 0;
  for (int r = 1; r < static_cast<int>(m.archetypes.size()); ++r) {
    if (m.similarity(r, col) > m.similarity(best, col) ||
        (m.similarity(r, col) == m.similarity(best, col) &&
         m.simplicity(r, col) > m.simplicity(best, col)))
      best = r;
  }
  return m.archetypes[best];
}

nlohmann::json ScoreMatrix::to_json() const {
  auto mat = [](const Mat& m) {
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < m.rows(); ++r)
      rows.emplace_back(m.row(r).begin(), m.row(r).end());
    return rows;
  };
  nlohmann::json j;
  j["archetypes"] = archetypes;
  j["targets"] = targets;
  j["dissimilarity"] = mat(dissimilarity);
  j["complexity"] = mat(complexity);
  j["similarity"] = mat(similarity);
  j["simplicity"] = mat(simplicity);
  return j;
}

ScoreMatrix ScoreMatrix::from_json(const nlohmann::json& j) {
  ScoreMatrix m;
  try {
    m.archetypes = j.at("archetypes").get<std::vector<std::string>>();
    m.targets = j.at("targets").get<std::vector<std::string>>();
    auto mat = [&](const char* key) {
      const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
      Mat out(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
      return out;
    };
    m.dissimilarity = mat("dissimilarity");
    m.complexity = mat("complexity");
    m.similarity = mat("similarity");
    m.simplicity = mat("simplicity");
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, std::string("score matrix: ") + e.what());
  }
  return m;
}

std::string ScoreMatrix::to_csv() const {
  std::ostringstream os;
  os << "archetype,target,dissimilarity,complexity,similarity,simplicity\n";
  for (size_t r = 0; r < archetypes.size(); ++r)
    for (size_t c = 0; c < targets.size(); ++c)
      os << archetypes[r] << ',' << targets[c] << ',' << format_double(dissimilarity(r, c))
         << ',' << format_double(complexity(r, c)) << ',' << format_double(similarity(r, c))
         << ',' << format_double(simplicity(r, c)) << "\n";
  return os.str();
}

MappedManifold map_manifold(const FitResult& fit, const SystemSpec& archetype, int n_points,
                            const std::string& archetype_name, const std::string& target_name) {
  if (!std::isfinite(fit.train_mse) || !std::isfinite(fit.test_mse))
    fail(Err::NonFiniteLoss, "map_manifold needs a converged fit");
  const auto sample = invariant_manifold(archetype, n_points);

  const bool have_norm = fit.mu.size() == archetype.dim && fit.sigma.size() == archetype.dim;
  MappedManifold out;
  out.archetype = archetype_name;
  out.target = target_name;
  out.points.reserve(sample.points.size());
  for (const Vec& p : sample.points) {
    Vec z = have_norm ? Vec((p - fit.mu).cwiseQuotient(fit.sigma)) : p;
    z = fit.model.forward(z);
    out.points.push_back(have_norm ? Vec(fit.sigma.cwiseProduct(z) + fit.mu) : z);
  }
  return out;
}

}  // namespace daa
