#pragma once

#include <span>
#include <vector>

#include "lhc/core.hpp"

namespace lhc {

/// A full labeling (A, y, z) of one sequence.
struct JointAssignment {
  std::size_t activity{0};
  std::vector<std::size_t> actions;
  std::vector<std::size_t> latents;

  friend bool operator==(const JointAssignment &, const JointAssignment &) = default;
};

[[nodiscard]] JointAssignment to_assignment(const DecodeResult &r);

/// Throws DimensionMismatch / LabelOutOfRange if `asg` does not fit `seq` in `space`.
void validate_assignment(const JointAssignment &asg, const SegmentSequence &seq,
                         const LabelSpace &space);

/// w1(y,z).x + w2(y,z)
[[nodiscard]] double score_node(const WeightPack &w, std::span<const double> x, std::size_t y,
                                std::size_t z);

/// w3(y',z',y,z) + w4(y',y,a)
[[nodiscard]] double score_transition(const WeightPack &w, std::size_t y_prev, std::size_t z_prev,
                                      std::size_t y, std::size_t z, std::size_t a);

/// w5(a).x0
[[nodiscard]] double score_global(const WeightPack &w, std::span<const double> x0, std::size_t a);

/// Total score F(A, y, z, x; w): node terms over all segments, transition
/// terms over consecutive pairs, and the global term.
[[nodiscard]] double joint_score(const WeightPack &w, const SegmentSequence &seq,
                                 const JointAssignment &asg);

/// Psi(x, A, y, z) laid out in the canonical flattening order, so that
/// dot(flatten(w), Psi) == joint_score(w, seq, asg).
[[nodiscard]] Vector joint_feature_map(const SegmentSequence &seq, const JointAssignment &asg,
                                       const LabelSpace &space);

/// Adds scale * Psi(seq, asg) into `out` (length weight_dim) without
/// materializing Psi.
void accumulate_feature_map(const SegmentSequence &seq, const JointAssignment &asg,
                            const LabelSpace &space, double scale, std::span<double> out);

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);

} // namespace lhc
