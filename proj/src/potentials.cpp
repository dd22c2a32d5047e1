#include "lhc/potentials.hpp"

namespace lhc {

JointAssignment to_assignment(const DecodeResult &r) {
  return JointAssignment{r.activity, r.actions, r.latents};
}

void validate_assignment(const JointAssignment &asg, const SegmentSequence &seq,
                         const LabelSpace &space) {
  const auto k = seq.length();
  if (asg.actions.size() != k) throw dimension_mismatch("assignment actions", k, asg.actions.size());
  if (asg.latents.size() != k) throw dimension_mismatch("assignment latents", k, asg.latents.size());
  if (asg.activity >= space.n_activities)
    throw Error(ErrorCode::LabelOutOfRange, "assignment activity out of range");
  for (std::size_t i = 0; i < k; ++i) {
    if (asg.actions[i] >= space.n_actions)
      throw Error(ErrorCode::LabelOutOfRange, "assignment action out of range");
    if (asg.latents[i] >= space.n_latent)
      throw Error(ErrorCode::LabelOutOfRange, "assignment latent out of range");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw dimension_mismatch("dot operand", a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double score_node(const WeightPack &w, std::span<const double> x, std::size_t y, std::size_t z) {
  return dot(w.w1(y, z), x) + w.w2(y, z);
}

double score_transition(const WeightPack &w, std::size_t y_prev, std::size_t z_prev, std::size_t y,
                        std::size_t z, std::size_t a) {
  return w.w3(y_prev, z_prev, y, z) + w.w4(y_prev, y, a);
}

double score_global(const WeightPack &w, std::span<const double> x0, std::size_t a) {
  return dot(w.w5(a), x0);
}

double joint_score(const WeightPack &w, const SegmentSequence &seq, const JointAssignment &asg) {
  validate_assignment(asg, seq, w.space());
  double total = 0.0;
  for (std::size_t k = 0; k < seq.length(); ++k)
    total += score_node(w, seq.segments[k], asg.actions[k], asg.latents[k]);
  for (std::size_t k = 1; k < seq.length(); ++k)
    total += score_transition(w, asg.actions[k - 1], asg.latents[k - 1], asg.actions[k],
                              asg.latents[k], asg.activity);
  total += score_global(w, seq.global, asg.activity);
  return total;
}

void accumulate_feature_map(const SegmentSequence &seq, const JointAssignment &asg,
                            const LabelSpace &space, double scale, std::span<double> out) {
  validate_assignment(asg, seq, space);
  const auto off = block_offsets(space);
  if (out.size() != off.total) throw dimension_mismatch("feature map buffer", off.total, out.size());
  const auto d = space.dim_segment;
  const auto states = space.n_states();
  auto state = [&](std::size_t k) { return asg.actions[k] * space.n_latent + asg.latents[k]; };

  for (std::size_t k = 0; k < seq.length(); ++k) {
    const auto s = state(k);
    const auto &x = seq.segments[k];
    if (x.size() != d) throw dimension_mismatch("segment", d, x.size());
    for (std::size_t i = 0; i < d; ++i) out[off.w1 + s * d + i] += scale * x[i];
    out[off.w2 + s] += scale;
    if (k > 0) {
      out[off.w3 + state(k - 1) * states + s] += scale;
      out[off.w4 + (asg.actions[k - 1] * space.n_actions + asg.actions[k]) * space.n_activities +
          asg.activity] += scale;
    }
  }
  if (seq.global.size() != space.dim_global)
    throw dimension_mismatch("global", space.dim_global, seq.global.size());
  for (std::size_t i = 0; i < space.dim_global; ++i)
    out[off.w5 + asg.activity * space.dim_global + i] += scale * seq.global[i];
}

Vector joint_feature_map(const SegmentSequence &seq, const JointAssignment &asg,
                         const LabelSpace &space) {
  Vector psi(space.weight_dim(), 0.0);
  accumulate_feature_map(seq, asg, space, 1.0, psi);
  return psi;
}

} // namespace lhc
