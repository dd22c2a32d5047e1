#include "lhc/init.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>

#include "random.hpp"

namespace lhc {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

using detail::uniform_index;
using detail::unit;

struct LloydRun {
  std::vector<std::size_t> assign;
  std::vector<Vector> centers;
  double sse{0.0};
  std::vector<double> history;
};

std::vector<Vector> seed_plus_plus(std::span<const Vector> pts, std::size_t k, std::mt19937_64 &rng) {
  std::vector<Vector> centers;
  centers.push_back(pts[uniform_index(rng, pts.size())]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = pts.size() - 1;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (r < d2[i]) {
          pick = i;
          break;
        }
        r -= d2[i];
      }
      // Rounding can land on an already-chosen point.
      if (d2[pick] == 0.0)
        pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
  }
  return centers;
}

double assign_points(std::span<const Vector> pts, const std::vector<Vector> &centers,
                     std::vector<std::size_t> &assign, bool &changed) {
  changed = false;
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = sq_dist(pts[i], centers[c]);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    if (assign[i] != best) changed = true;
    assign[i] = best;
    sse += bd;
  }
  return sse;
}

double current_sse(std::span<const Vector> pts, const std::vector<Vector> &centers,
                   const std::vector<std::size_t> &assign) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) sse += sq_dist(pts[i], centers[assign[i]]);
  return sse;
}

void update_centers(std::span<const Vector> pts, std::vector<Vector> &centers,
                    std::vector<std::size_t> &assign) {
  const std::size_t k = centers.size(), dim = pts[0].size();
  std::vector<std::size_t> counts(k, 0);
  for (auto &c : centers) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++counts[assign[i]];
    for (std::size_t d = 0; d < dim; ++d) centers[assign[i]][d] += pts[i][d];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (auto &v : centers[c]) v /= static_cast<double>(counts[c]);

  // Refill empty clusters with the point farthest from its own center. The
  // donor cluster must keep at least one point.
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    std::size_t far = pts.size();
    double fd = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (counts[assign[i]] < 2) continue;
      const double d = sq_dist(pts[i], centers[assign[i]]);
      if (d > fd) {
        fd = d;
        far = i;
      }
    }
    if (far == pts.size()) break;
    const std::size_t donor = assign[far];
    // Recompute the donor mean without the moved point.
    const double n = static_cast<double>(counts[donor]);
    for (std::size_t d = 0; d < dim; ++d)
      centers[donor][d] = (centers[donor][d] * n - pts[far][d]) / (n - 1.0);
    --counts[donor];
    centers[c] = pts[far];
    counts[c] = 1;
    assign[far] = c;
  }
}

LloydRun lloyd(std::span<const Vector> pts, std::size_t k, std::mt19937_64 &rng) {
  LloydRun run;
  run.centers = seed_plus_plus(pts, k, rng);
  run.assign.assign(pts.size(), k);
  bool changed = true;
  run.sse = assign_points(pts, run.centers, run.assign, changed);
  run.history.push_back(run.sse);
  for (std::size_t it = 0; it < kKmeansMaxIters; ++it) {
    update_centers(pts, run.centers, run.assign);
    run.sse = assign_points(pts, run.centers, run.assign, changed);
    run.history.push_back(run.sse);
    if (!changed) break;
  }
  // Centers are left as the means of the final assignment.
  update_centers(pts, run.centers, run.assign);
  run.sse = current_sse(pts, run.centers, run.assign);
  run.history.push_back(run.sse);
  return run;
}

std::vector<std::vector<std::size_t>> reshape(const std::vector<std::size_t> &flat,
                                              const std::vector<std::size_t> &lengths) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t pos = 0;
  for (auto len : lengths) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                     flat.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

std::vector<std::vector<std::size_t>> cluster_pooled(const std::vector<Vector> &pts,
                                                     const std::vector<std::size_t> &lengths,
                                                     std::size_t n_latent, std::uint64_t seed) {
  if (pts.empty()) return reshape({}, lengths);
  const std::size_t k = std::min(n_latent, count_distinct(pts));
  if (k <= 1) return reshape(std::vector<std::size_t>(pts.size(), 0), lengths);
  return reshape(kmeans(pts, k, kKmeansRestarts, seed).assignments, lengths);
}

} // namespace

std::size_t count_distinct(std::span<const Vector> points) {
  std::set<Vector> seen(points.begin(), points.end());
  return seen.size();
}

KmeansResult kmeans(std::span<const Vector> points, std::size_t k, std::size_t restarts,
                    std::uint64_t seed) {
  if (k == 0 || restarts == 0) throw Error(ErrorCode::DegenerateInput, "k and restarts must be >= 1");
  if (points.empty()) throw Error(ErrorCode::DegenerateInput, "no points to cluster");
  const auto dim = points[0].size();
  for (const auto &p : points)
    if (p.size() != dim) throw dimension_mismatch("k-means point", dim, p.size());
  const auto distinct = count_distinct(points);
  if (distinct < k)
    throw Error(ErrorCode::DegenerateInput, "k-means: " + std::to_string(distinct) +
                                                " distinct points < k = " + std::to_string(k));

  std::mt19937_64 rng(seed);
  KmeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = lloyd(points, k, rng);
    best.restart_sse.push_back(run.sse);
    if (run.sse < best.sse) {
      best.sse = run.sse;
      best.assignments = std::move(run.assign);
      best.centers = std::move(run.centers);
      best.sse_history = std::move(run.history);
    }
  }
  return best;
}

std::vector<std::vector<std::size_t>> init_random(std::span<const SegmentSequence> data,
                                                  std::size_t n_latent, std::uint64_t seed) {
  if (n_latent == 0) throw Error(ErrorCode::InvalidHyperparams, "n_latent must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(data.size());
  for (const auto &seq : data) {
    std::vector<std::size_t> z(seq.length());
    for (auto &v : z) v = n_latent == 1 ? 0 : uniform_index(rng, n_latent);
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<std::vector<std::size_t>> init_kmeans_features(std::span<const SegmentSequence> data,
                                                           std::size_t n_latent, std::uint64_t seed) {
  if (n_latent == 0) throw Error(ErrorCode::InvalidHyperparams, "n_latent must be >= 1");
  std::vector<Vector> pts;
  std::vector<std::size_t> lengths;
  for (const auto &seq : data) {
    lengths.push_back(seq.length());
    pts.insert(pts.end(), seq.segments.begin(), seq.segments.end());
  }
  return cluster_pooled(pts, lengths, n_latent, seed);
}

std::vector<std::vector<std::size_t>>
init_kmeans_categorical(const std::vector<std::vector<std::size_t>> &labels, std::size_t n_cats,
                        std::size_t n_latent, std::uint64_t seed) {
  if (n_latent == 0) throw Error(ErrorCode::InvalidHyperparams, "n_latent must be >= 1");
  if (n_cats == 0) throw Error(ErrorCode::LabelOutOfRange, "n_cats must be >= 1");
  std::vector<Vector> pts;
  std::vector<std::size_t> lengths;
  for (const auto &seq : labels) {
    lengths.push_back(seq.size());
    for (auto c : seq) {
      if (c >= n_cats)
        throw Error(ErrorCode::LabelOutOfRange, "categorical label " + std::to_string(c) +
                                                    " not in [0, " + std::to_string(n_cats) + ")");
      Vector onehot(n_cats, 0.0);
      onehot[c] = 1.0;
      pts.push_back(std::move(onehot));
    }
  }
  return cluster_pooled(pts, lengths, n_latent, seed);
}

} // namespace lhc
