#include "daa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace daa {

namespace {

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const size_t n = xs.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });

  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = 0.5 * (double(i) + double(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    fail(Err::InvalidSpec, "spearman needs two equally sized samples of length >= 2");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const size_t n = xs.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;  // a constant sample carries no order
  return sxy / std::sqrt(sxx * syy);
}

double directed_hausdorff(const std::vector<Vec>& from, const std::vector<Vec>& to) {
  if (from.empty() || to.empty()) fail(Err::EmptyPointSet, "hausdorff needs nonempty sets");
  double worst = 0.0;
  for (const Vec& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& q : to) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

double hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

}  // namespace daa
