#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lhc/core.hpp"

namespace lhc {

/// Gold labels and loss weight for loss-augmented decoding.
struct LossSpec {
  std::span<const std::size_t> gold_actions;
  std::size_t gold_activity{0};
  double lambda_loss{1.0};
};

/// Exact argmax of F over (A, y, z) by a max-sum sweep over the collapsed
/// (y, z) chain, one sweep per activity.
///
/// Ties: the backpointer keeps the smallest predecessor state index
/// s = y * N_z + z, and the final selection keeps the smallest A, then the
/// smallest final state. Among equal-score assignments this returns the
/// smallest one in lexicographic order of (A, s_K, s_{K-1}, ..., s_1).
[[nodiscard]] DecodeResult decode(const WeightPack &w, const SegmentSequence &seq);

/// Argmax of loss_delta(gold, candidate) + F(candidate). The per-segment
/// loss (1/K)[y_k != gold_k] is folded into the node scores and
/// lambda [A != gold_A] into the final selection. The returned score includes
/// the loss. With `prefer_gold_activity` the gold activity wins ties at the
/// final selection; the remaining activities keep ascending order.
[[nodiscard]] DecodeResult decode_loss_augmented(const WeightPack &w, const SegmentSequence &seq,
                                                 std::span<const std::size_t> gold_actions,
                                                 std::size_t gold_activity, double lambda_loss,
                                                 bool prefer_gold_activity = false);

struct LatentCompletion {
  std::vector<std::size_t> latents;
  double score{0.0};
};

/// argmax_z F(A, y, z) with actions and activity clamped; O(N_z^2 K).
/// Ties keep the lexicographically smallest (z_K, ..., z_1).
[[nodiscard]] LatentCompletion complete_latent(const WeightPack &w, const SegmentSequence &seq,
                                               std::span<const std::size_t> gold_actions,
                                               std::size_t gold_activity);

inline constexpr std::uint64_t kBruteForceCap = 2'000'000;

/// Exhaustive enumeration of all N_A (N_y N_z)^K assignments with the same
/// tie rule as decode(). Throws InstanceTooLarge above `cap`.
[[nodiscard]] DecodeResult brute_force_decode(const WeightPack &w, const SegmentSequence &seq,
                                              const std::optional<LossSpec> &loss = std::nullopt,
                                              std::uint64_t cap = kBruteForceCap);

/// Exhaustive counterpart of complete_latent().
[[nodiscard]] LatentCompletion brute_force_complete_latent(const WeightPack &w,
                                                           const SegmentSequence &seq,
                                                           std::span<const std::size_t> gold_actions,
                                                           std::size_t gold_activity,
                                                           std::uint64_t cap = kBruteForceCap);

} // namespace lhc
