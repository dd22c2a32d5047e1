#include "lhc/inference.hpp"

#include <limits>

#include "lhc/loss.hpp"
#include "lhc/potentials.hpp"

namespace lhc {

namespace {

constexpr std::size_t kNoPredecessor = std::numeric_limits<std::size_t>::max();

void check_gold(const SegmentSequence &seq, const LabelSpace &space,
                std::span<const std::size_t> gold_actions, std::size_t gold_activity) {
  if (gold_actions.size() != seq.length())
    throw dimension_mismatch("gold actions", seq.length(), gold_actions.size());
  for (auto y : gold_actions)
    if (y >= space.n_actions) throw Error(ErrorCode::LabelOutOfRange, "gold action out of range");
  if (gold_activity >= space.n_activities)
    throw Error(ErrorCode::LabelOutOfRange, "gold activity out of range");
}

void check_dims(const SegmentSequence &seq, const LabelSpace &space) {
  if (seq.segments.empty()) throw dimension_mismatch("segment count (K >= 1)", 1, 0);
  for (const auto &x : seq.segments)
    if (x.size() != space.dim_segment) throw dimension_mismatch("segment", space.dim_segment, x.size());
  if (seq.global.size() != space.dim_global)
    throw dimension_mismatch("global", space.dim_global, seq.global.size());
}

// Max-sum over the collapsed chain. `loss` adds (1/K)[y_k != gold_k] to the
// node scores and lambda [A != gold_A] at the final selection.
DecodeResult chain_decode(const WeightPack &w, const SegmentSequence &seq, const LossSpec *loss,
                          bool gold_first = false) {
  const auto &space = w.space();
  check_dims(seq, space);
  if (loss) check_gold(seq, space, loss->gold_actions, loss->gold_activity);

  const std::size_t K = seq.length();
  const std::size_t S = space.n_states();
  const std::size_t Nz = space.n_latent;
  const std::size_t Ny = space.n_actions;
  const std::size_t Na = space.n_activities;

  std::vector<double> node(K * S);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t s = 0; s < S; ++s) {
      const std::size_t y = s / Nz;
      double v = score_node(w, seq.segments[k], y, s % Nz);
      if (loss && y != loss->gold_actions[k]) v += 1.0 / static_cast<double>(K);
      node[k * S + s] = v;
    }
  std::vector<double> trans(S * S);
  for (std::size_t sp = 0; sp < S; ++sp)
    for (std::size_t s = 0; s < S; ++s) trans[sp * S + s] = w.w3(sp / Nz, sp % Nz, s / Nz, s % Nz);

  std::vector<double> prev(S), cur(S), w4a(Ny * Ny);
  std::vector<std::size_t> back(K * S, kNoPredecessor), best_back;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_a = 0, best_last = 0;

  for (std::size_t i = 0; i < Na; ++i) {
    std::size_t a = i;
    if (gold_first) a = i == 0 ? loss->gold_activity : (i <= loss->gold_activity ? i - 1 : i);
    for (std::size_t yp = 0; yp < Ny; ++yp)
      for (std::size_t y = 0; y < Ny; ++y) w4a[yp * Ny + y] = w.w4(yp, y, a);

    std::copy(node.begin(), node.begin() + static_cast<std::ptrdiff_t>(S), prev.begin());
    for (std::size_t k = 1; k < K; ++k) {
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t y = s / Nz;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t sp = 0; sp < S; ++sp) {
          const double c = prev[sp] + trans[sp * S + s] + w4a[(sp / Nz) * Ny + y];
          if (c > best) {
            best = c;
            arg = sp;
          }
        }
        cur[s] = node[k * S + s] + best;
        back[k * S + s] = arg;
      }
      std::swap(prev, cur);
    }

    double global = score_global(w, seq.global, a);
    if (loss && a != loss->gold_activity) global += loss->lambda_loss;
    bool improved = false;
    for (std::size_t s = 0; s < S; ++s) {
      const double total = prev[s] + global;
      if (total > best_score) {
        best_score = total;
        best_a = a;
        best_last = s;
        improved = true;
      }
    }
    if (improved) std::swap(best_back, back);
    if (back.size() != K * S) back.assign(K * S, kNoPredecessor);
  }

  DecodeResult r;
  r.activity = best_a;
  r.score = best_score;
  r.actions.resize(K);
  r.latents.resize(K);
  std::size_t s = best_last;
  for (std::size_t k = K; k-- > 0;) {
    r.actions[k] = s / Nz;
    r.latents[k] = s % Nz;
    if (k > 0) s = best_back[k * S + s];
  }
  return r;
}

std::uint64_t checked_count(std::uint64_t base, std::size_t exponent, std::uint64_t factor,
                            std::uint64_t cap) {
  std::uint64_t n = factor;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (n > cap / base) return cap + 1;
    n *= base;
  }
  return n;
}

} // namespace

DecodeResult decode(const WeightPack &w, const SegmentSequence &seq) {
  return chain_decode(w, seq, nullptr);
}

DecodeResult decode_loss_augmented(const WeightPack &w, const SegmentSequence &seq,
                                   std::span<const std::size_t> gold_actions,
                                   std::size_t gold_activity, double lambda_loss,
                                   bool prefer_gold_activity) {
  const LossSpec loss{gold_actions, gold_activity, lambda_loss};
  return chain_decode(w, seq, &loss, prefer_gold_activity);
}

LatentCompletion complete_latent(const WeightPack &w, const SegmentSequence &seq,
                                 std::span<const std::size_t> gold_actions,
                                 std::size_t gold_activity) {
  const auto &space = w.space();
  check_dims(seq, space);
  check_gold(seq, space, gold_actions, gold_activity);

  const std::size_t K = seq.length();
  const std::size_t Nz = space.n_latent;
  std::vector<double> prev(Nz), cur(Nz);
  std::vector<std::size_t> back(K * Nz, kNoPredecessor);

  for (std::size_t z = 0; z < Nz; ++z) prev[z] = score_node(w, seq.segments[0], gold_actions[0], z);
  for (std::size_t k = 1; k < K; ++k) {
    const std::size_t yp = gold_actions[k - 1], y = gold_actions[k];
    const double w4 = w.w4(yp, y, gold_activity);
    for (std::size_t z = 0; z < Nz; ++z) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t zp = 0; zp < Nz; ++zp) {
        const double c = prev[zp] + w.w3(yp, zp, y, z) + w4;
        if (c > best) {
          best = c;
          arg = zp;
        }
      }
      cur[z] = score_node(w, seq.segments[k], y, z) + best;
      back[k * Nz + z] = arg;
    }
    std::swap(prev, cur);
  }

  std::size_t last = 0;
  for (std::size_t z = 1; z < Nz; ++z)
    if (prev[z] > prev[last]) last = z;

  LatentCompletion out;
  out.score = prev[last] + score_global(w, seq.global, gold_activity);
  out.latents.resize(K);
  std::size_t z = last;
  for (std::size_t k = K; k-- > 0;) {
    out.latents[k] = z;
    if (k > 0) z = back[k * Nz + z];
  }
  return out;
}

DecodeResult brute_force_decode(const WeightPack &w, const SegmentSequence &seq,
                                const std::optional<LossSpec> &loss, std::uint64_t cap) {
  const auto &space = w.space();
  check_dims(seq, space);
  if (loss) check_gold(seq, space, loss->gold_actions, loss->gold_activity);
  const std::size_t K = seq.length();
  const std::size_t S = space.n_states();
  const std::size_t Nz = space.n_latent;
  if (checked_count(S, K, space.n_activities, cap) > cap)
    throw Error(ErrorCode::InstanceTooLarge, "brute-force enumeration exceeds cap of " +
                                                 std::to_string(cap) + " assignments");

  JointAssignment asg{0, std::vector<std::size_t>(K), std::vector<std::size_t>(K)};
  DecodeResult best;
  best.score = -std::numeric_limits<double>::infinity();

  // Odometer over (A, s_K, ..., s_1): s_1 is the fastest digit, so the first
  // maximum found is the lexicographically smallest one.
  std::vector<std::size_t> states(K, 0);
  for (std::size_t a = 0; a < space.n_activities; ++a) {
    std::fill(states.begin(), states.end(), 0);
    while (true) {
      asg.activity = a;
      for (std::size_t k = 0; k < K; ++k) {
        asg.actions[k] = states[k] / Nz;
        asg.latents[k] = states[k] % Nz;
      }
      double v = joint_score(w, seq, asg);
      if (loss)
        v += loss_delta(loss->gold_actions, asg.actions, loss->gold_activity, a, loss->lambda_loss);
      if (v > best.score) {
        best.score = v;
        best.activity = a;
        best.actions = asg.actions;
        best.latents = asg.latents;
      }
      std::size_t k = 0;
      while (k < K && ++states[k] == S) states[k++] = 0;
      if (k == K) break;
    }
  }
  return best;
}

LatentCompletion brute_force_complete_latent(const WeightPack &w, const SegmentSequence &seq,
                                             std::span<const std::size_t> gold_actions,
                                             std::size_t gold_activity, std::uint64_t cap) {
  const auto &space = w.space();
  check_dims(seq, space);
  check_gold(seq, space, gold_actions, gold_activity);
  const std::size_t K = seq.length();
  if (checked_count(space.n_latent, K, 1, cap) > cap)
    throw Error(ErrorCode::InstanceTooLarge, "brute-force enumeration exceeds cap");

  JointAssignment asg{gold_activity, std::vector<std::size_t>(gold_actions.begin(), gold_actions.end()),
                      std::vector<std::size_t>(K, 0)};
  LatentCompletion best;
  best.score = -std::numeric_limits<double>::infinity();
  while (true) {
    const double v = joint_score(w, seq, asg);
    if (v > best.score) {
      best.score = v;
      best.latents = asg.latents;
    }
    std::size_t k = 0;
    while (k < K && ++asg.latents[k] == space.n_latent) asg.latents[k++] = 0;
    if (k == K) break;
  }
  return best;
}

} // namespace lhc
