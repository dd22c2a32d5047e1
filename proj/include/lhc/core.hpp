#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhc/error.hpp"

namespace lhc {

using Vector = std::vector<double>;

/// Cardinalities of the model: actions (N_y), latent sub-action states (N_z),
/// activities (N_A), and the segment / global feature dimensions.
struct LabelSpace {
  std::size_t n_actions{1};
  std::size_t n_latent{1};
  std::size_t n_activities{1};
  std::size_t dim_segment{1};
  std::size_t dim_global{1};

  /// Number of collapsed per-segment states (y, z).
  [[nodiscard]] std::size_t n_states() const noexcept { return n_actions * n_latent; }

  /// Length of the flattened parameter vector:
  /// N_y*N_z*D + N_y*N_z + (N_y*N_z)^2 + N_y^2*N_A + N_A*D0.
  [[nodiscard]] std::size_t weight_dim() const noexcept;

  /// Throws InvalidHyperparams if any cardinality is zero.
  void validate() const;

  friend bool operator==(const LabelSpace &, const LabelSpace &) = default;
};

/// One video: K segment feature vectors, one global feature vector, and the
/// gold labels when known.
struct SegmentSequence {
  std::string id;
  std::string subject;
  std::vector<Vector> segments;
  Vector global;
  std::optional<std::vector<std::size_t>> actions;
  std::optional<std::size_t> activity;

  [[nodiscard]] std::size_t length() const noexcept { return segments.size(); }
  [[nodiscard]] bool labeled() const noexcept { return actions.has_value() && activity.has_value(); }

  friend bool operator==(const SegmentSequence &, const SegmentSequence &) = default;
};

/// Checks every SegmentSequence invariant against `space`; throws
/// DimensionMismatch, LabelOutOfRange or NonFiniteValue.
void validate_sequence(const SegmentSequence &seq, const LabelSpace &space);

/// The five parameter blocks stored contiguously in canonical order:
///   w1 [y][z][d]          segment observation filters
///   w2 [y][z]             per-state bias
///   w3 [y'][z'][y][z]     collapsed-state transitions (source major)
///   w4 [y'][y][A]         activity-dependent action transitions
///   w5 [A][d0]            activity/global-feature filters
/// flatten() is therefore a copy and unflatten() a validated copy.
class WeightPack {
public:
  explicit WeightPack(const LabelSpace &space);

  [[nodiscard]] const LabelSpace &space() const noexcept { return space_; }

  [[nodiscard]] std::span<const double> w1(std::size_t y, std::size_t z) const;
  [[nodiscard]] std::span<double> w1(std::size_t y, std::size_t z);
  [[nodiscard]] double w2(std::size_t y, std::size_t z) const;
  [[nodiscard]] double &w2(std::size_t y, std::size_t z);
  [[nodiscard]] double w3(std::size_t y_prev, std::size_t z_prev, std::size_t y, std::size_t z) const;
  [[nodiscard]] double &w3(std::size_t y_prev, std::size_t z_prev, std::size_t y, std::size_t z);
  [[nodiscard]] double w4(std::size_t y_prev, std::size_t y, std::size_t a) const;
  [[nodiscard]] double &w4(std::size_t y_prev, std::size_t y, std::size_t a);
  [[nodiscard]] std::span<const double> w5(std::size_t a) const;
  [[nodiscard]] std::span<double> w5(std::size_t a);

  /// Read-only view of the flat storage.
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const WeightPack &, const WeightPack &) = default;

private:
  friend WeightPack unflatten(std::span<const double>, const LabelSpace &);

  LabelSpace space_;
  Vector data_;
};

/// Offsets of each block inside the flattened vector.
struct BlockOffsets {
  std::size_t w1, w2, w3, w4, w5, total;
};
[[nodiscard]] BlockOffsets block_offsets(const LabelSpace &space) noexcept;

[[nodiscard]] Vector flatten(const WeightPack &weights);
/// Throws DimensionMismatch on a wrong length, NonFiniteValue on NaN/inf.
[[nodiscard]] WeightPack unflatten(std::span<const double> v, const LabelSpace &space);

enum class InitStrategy { Random, KmeansFeatures, KmeansCategorical };

[[nodiscard]] std::string to_string(InitStrategy s);
[[nodiscard]] InitStrategy parse_init_strategy(const std::string &name);

struct Hyperparams {
  double c_reg{1.0};
  double lambda_loss{1.0};
  std::size_t n_latent{2};
  double epsilon_cp{0.01};
  std::size_t max_cccp_iters{20};
  std::size_t max_cp_iters{1000};
  InitStrategy init_strategy{InitStrategy::KmeansFeatures};
  std::uint64_t rng_seed{0};
  /// Worker threads for per-example decoding (0 = hardware concurrency).
  std::size_t n_threads{1};

  /// Throws InvalidHyperparams unless C > 0, 0 <= lambda <= 1, eps > 0 and
  /// all counts are positive.
  void validate() const;
};

struct DecodeResult {
  std::size_t activity{0};
  std::vector<std::size_t> actions;
  std::vector<std::size_t> latents;
  double score{0.0};
};

} // namespace lhc
