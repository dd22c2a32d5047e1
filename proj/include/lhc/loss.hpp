#pragma once

#include <cstddef>
#include <span>

namespace lhc {

/// Structured loss between a gold and a predicted labeling:
///   lambda * [pred_activity != gold_activity] + (1/K) * #{k : pred_k != gold_k}.
/// Throws LengthMismatch if the action lists differ in length or are empty.
[[nodiscard]] double loss_delta(std::span<const std::size_t> gold_actions,
                                std::span<const std::size_t> pred_actions,
                                std::size_t gold_activity, std::size_t pred_activity,
                                double lambda_loss);

} // namespace lhc
