#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lhc/core.hpp"

namespace lhc {

struct KmeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Vector> centers;
  double sse{0.0};
  /// SSE of the winning restart after each Lloyd iteration.
  std::vector<double> sse_history;
  /// Final SSE of every restart, in restart order.
  std::vector<double> restart_sse;
};

inline constexpr std::size_t kKmeansMaxIters = 100;
inline constexpr std::size_t kKmeansRestarts = 10;

/// Lloyd's algorithm with k-means++ seeding, repeated `restarts` times; the
/// lowest-SSE run wins. An emptied cluster is refilled with the point that is
/// currently farthest from its center. Throws DegenerateInput when there are
/// fewer distinct points than k.
[[nodiscard]] KmeansResult kmeans(std::span<const Vector> points, std::size_t k,
                                  std::size_t restarts, std::uint64_t seed);

[[nodiscard]] std::size_t count_distinct(std::span<const Vector> points);

/// Uniform iid latent states per segment.
[[nodiscard]] std::vector<std::vector<std::size_t>> init_random(std::span<const SegmentSequence> data,
                                                                std::size_t n_latent,
                                                                std::uint64_t seed);

/// Clusters every segment vector of the dataset into n_latent groups and
/// uses the cluster ids as initial latents. If the data has fewer distinct
/// segments than n_latent, only that many clusters are formed.
[[nodiscard]] std::vector<std::vector<std::size_t>>
init_kmeans_features(std::span<const SegmentSequence> data, std::size_t n_latent, std::uint64_t seed);

/// Same as init_kmeans_features but clusters 1-of-N encodings of per-segment
/// categorical labels in [0, n_cats).
[[nodiscard]] std::vector<std::vector<std::size_t>>
init_kmeans_categorical(const std::vector<std::vector<std::size_t>> &labels, std::size_t n_cats,
                        std::size_t n_latent, std::uint64_t seed);

} // namespace lhc
