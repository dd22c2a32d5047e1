#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhc/core.hpp"
#include "lhc/loss.hpp"

namespace lhc {

using LatentPaths = std::vector<std::vector<std::size_t>>;

struct QpResult {
  Vector w;
  double slack{0.0};
  double kkt_residual{0.0};
  std::size_t sweeps{0};
  bool converged{false};
};

/// Working set of the 1-slack cutting-plane QP. Each row holds the averaged
/// joint-feature difference Psi(gold, z*) - Psi(violator) and the averaged
/// loss of the violators. The Gram matrix is cached as rows are added.
class ConstraintSet {
public:
  struct Row {
    Vector dpsi;
    double loss{0.0};
  };

  /// Appends a row with a zero dual. Throws DimensionMismatch if its length
  /// differs from earlier rows, NumericalInstability if non-finite.
  void add(Row row);

  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }
  [[nodiscard]] const std::vector<Row> &rows() const noexcept { return rows_; }
  [[nodiscard]] const Vector &duals() const noexcept { return duals_; }
  [[nodiscard]] double gram(std::size_t i, std::size_t j) const { return gram_[i * size() + j]; }

private:
  friend QpResult qp_solve(ConstraintSet &cs, double c_reg);

  std::vector<Row> rows_;
  Vector duals_;
  Vector gram_;
};

inline constexpr double kQpTolerance = 1e-6;
inline constexpr std::size_t kQpMaxSweeps = 10'000;

/// Solves  min 1/2 |w|^2 + C xi  s.t.  w.dpsi_r >= loss_r - xi, xi >= 0
/// through its dual  max sum a_r loss_r - 1/2 |sum a_r dpsi_r|^2 over
/// {a >= 0, sum a <= C}. The inequality is turned into an equality with an
/// extra "unused budget" coordinate and the dual is climbed by pairwise
/// coordinate steps between the most and least attractive coordinates until
/// the KKT gap drops below kQpTolerance. Duals in `cs` are warm-started and
/// updated in place.
QpResult qp_solve(ConstraintSet &cs, double c_reg);

/// One training example with the latent path used for its gold labeling.
struct LatentExample {
  const SegmentSequence *seq{nullptr};
  std::span<const std::size_t> latents;
};

struct TrainLogRecord {
  std::string kind; // "cp" or "cccp"
  std::size_t cccp_iter{0};
  std::size_t cp_iter{0};
  double objective{0.0};
  double violation{0.0};
  double slack{0.0};
  double loss{0.0};
  double wall_time{0.0};
};

using TrainLogger = std::function<void(const TrainLogRecord &)>;

struct SsvmResult {
  WeightPack weights;
  double slack{0.0};
  Vector duals;
  std::size_t cp_iterations{0};
  bool converged{false};
  std::size_t qp_failures{0};
  /// Averaged loss of each row added to the working set, in order.
  std::vector<double> row_losses;
  /// Tolerance in force when the solver stopped (see `target`).
  double epsilon{0.0};
  /// 1/2 |w|^2 + C * averaged hinge at the returned weights.
  double objective{0.0};
};

inline constexpr double kRefineFactor = 0.1;
inline constexpr double kRefineFloor = 1e-5;

/// 1-slack cutting-plane structured SVM with latent paths held fixed.
/// Each iteration runs loss-augmented decoding on every example, averages
/// the feature differences and losses into one joint constraint, and stops
/// once that constraint is violated by no more than slack + epsilon.
/// With a `target`, a converged solution whose objective is still above the
/// target is refined by shrinking epsilon by kRefineFactor (not below
/// kRefineFloor) and continuing on the same working set.
[[nodiscard]] SsvmResult solve_structured_svm(std::span<const LatentExample> examples,
                                              const LabelSpace &space, const Hyperparams &hp,
                                              const TrainLogger &log = {},
                                              std::size_t cccp_iter = 0,
                                              std::optional<double> target = std::nullopt);

/// Convex upper bound with latents fixed:
///   1/2 |w|^2 + C/n sum_i [max_{A,y,z} (Delta + F) - F(gold_i, z_i)].
[[nodiscard]] double fixed_latent_objective(const WeightPack &w,
                                            std::span<const LatentExample> examples,
                                            const Hyperparams &hp);

struct SurrogateEval {
  double objective{0.0};
  /// argmax_z F(gold_i, z) for every example.
  LatentPaths completions;
};

/// Latent margin-rescaled surrogate:
///   1/2 |w|^2 + C/n sum_i [max_{A,y,z} (Delta + F) - max_z F(gold_i, z)].
[[nodiscard]] SurrogateEval surrogate_objective(const WeightPack &w,
                                                std::span<const SegmentSequence> data,
                                                const Hyperparams &hp);

struct TrainReport {
  std::vector<double> cccp_objective_per_iter;
  std::vector<std::size_t> cp_iterations_per_cccp;
  /// Row losses of the constraints generated in each M-step.
  std::vector<std::vector<double>> constraint_losses_per_cccp;
  /// Flattened weights after each accepted M-step.
  std::vector<Vector> weights_per_iter;
  std::size_t cccp_iterations{0};
  double final_slack{0.0};
  Vector final_duals;
  /// Latent paths the final weights were trained against.
  LatentPaths final_latents;
  bool converged{false};
  std::string stop_reason;
  double wall_time{0.0};
};

struct TrainOptions {
  /// Per-segment categorical labels for InitStrategy::KmeansCategorical.
  const LatentPaths *categories{nullptr};
  std::size_t n_categories{0};
  TrainLogger log;
};

struct TrainResult {
  WeightPack weights;
  TrainReport report;
};

/// Latent structured SVM training by CCCP. The model label space is `space`
/// with n_latent replaced by hp.n_latent.
///
/// Iteration 1 initializes the latent paths and solves the structured SVM
/// (M-step). Each later iteration first completes the latents under the
/// current weights (E-step) and stops if they did not change; otherwise it
/// runs another M-step. Training also stops when the surrogate objective
/// decreases by less than 1e-4 relative, or after max_cccp_iters. An M-step
/// whose result does not lower the fixed-latent bound is discarded and
/// training stops with the previous weights.
[[nodiscard]] TrainResult train(std::span<const SegmentSequence> data, const LabelSpace &space,
                                const Hyperparams &hp, const TrainOptions &options = {});

inline constexpr double kCccpRelativeTolerance = 1e-4;

} // namespace lhc
