#include "lhc/learning.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "lhc/inference.hpp"
#include "lhc/init.hpp"
#include "lhc/potentials.hpp"
#include "parallel.hpp"

namespace lhc {

double loss_delta(std::span<const std::size_t> gold_actions, std::span<const std::size_t> pred_actions,
                  std::size_t gold_activity, std::size_t pred_activity, double lambda_loss) {
  if (gold_actions.size() != pred_actions.size())
    throw Error(ErrorCode::LengthMismatch, "loss_delta: gold has " +
                                               std::to_string(gold_actions.size()) +
                                               " actions, prediction has " +
                                               std::to_string(pred_actions.size()));
  if (gold_actions.empty()) throw Error(ErrorCode::LengthMismatch, "loss_delta: empty sequences");
  std::size_t wrong = 0;
  for (std::size_t k = 0; k < gold_actions.size(); ++k) wrong += gold_actions[k] != pred_actions[k];
  const double activity_term = pred_activity != gold_activity ? lambda_loss : 0.0;
  return activity_term + static_cast<double>(wrong) / static_cast<double>(gold_actions.size());
}

void ConstraintSet::add(Row row) {
  if (!rows_.empty() && row.dpsi.size() != rows_.front().dpsi.size())
    throw dimension_mismatch("constraint row", rows_.front().dpsi.size(), row.dpsi.size());
  if (!std::isfinite(row.loss))
    throw Error(ErrorCode::NumericalInstability, "constraint loss is not finite");
  for (double v : row.dpsi)
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericalInstability, "constraint row is not finite");

  const std::size_t old_n = rows_.size(), n = old_n + 1;
  Vector gram(n * n);
  for (std::size_t i = 0; i < old_n; ++i)
    for (std::size_t j = 0; j < old_n; ++j) gram[i * n + j] = gram_[i * old_n + j];
  for (std::size_t i = 0; i < old_n; ++i) {
    const double g = dot(rows_[i].dpsi, row.dpsi);
    gram[i * n + old_n] = g;
    gram[old_n * n + i] = g;
  }
  gram[old_n * n + old_n] = dot(row.dpsi, row.dpsi);
  gram_ = std::move(gram);
  rows_.push_back(std::move(row));
  duals_.push_back(0.0);
}

QpResult qp_solve(ConstraintSet &cs, double c_reg) {
  if (cs.empty()) throw Error(ErrorCode::QpFailure, "qp_solve: empty constraint set");
  if (!(c_reg > 0.0)) throw Error(ErrorCode::InvalidHyperparams, "qp_solve: C must be > 0");

  const std::size_t n = cs.size();
  Vector &alpha = cs.duals_;
  double used = 0.0;
  for (auto &a : alpha) {
    a = std::max(a, 0.0);
    used += a;
  }
  if (used > c_reg) {
    for (auto &a : alpha) a *= c_reg / used;
    used = c_reg;
  }
  double budget = c_reg - used;

  // grad[r] = loss_r - (G alpha)_r; the budget coordinate has gradient 0.
  Vector grad(n);
  for (std::size_t r = 0; r < n; ++r) {
    double ga = 0.0;
    for (std::size_t s = 0; s < n; ++s) ga += cs.gram(r, s) * alpha[s];
    grad[r] = cs.rows()[r].loss - ga;
  }

  constexpr std::size_t kBudget = std::numeric_limits<std::size_t>::max();
  auto gram_of = [&](std::size_t a, std::size_t b) {
    return (a == kBudget || b == kBudget) ? 0.0 : cs.gram(a, b);
  };

  QpResult out;
  const std::size_t max_steps = kQpMaxSweeps * n;
  std::size_t steps = 0;
  while (true) {
    std::size_t up = kBudget, down = kBudget;
    double g_up = 0.0, g_down = budget > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      if (grad[r] > g_up) {
        g_up = grad[r];
        up = r;
      }
      if (alpha[r] > 0.0 && grad[r] < g_down) {
        g_down = grad[r];
        down = r;
      }
    }
    const double gap = g_up - g_down;
    out.kkt_residual = std::max(0.0, gap);
    if (!std::isfinite(g_up) || (std::isnan(gap)))
      throw Error(ErrorCode::NumericalInstability, "qp_solve: non-finite gradient");
    if (gap <= kQpTolerance) {
      out.converged = true;
      break;
    }
    if (steps >= max_steps) break;
    ++steps;

    const double avail = down == kBudget ? budget : alpha[down];
    const double eta = gram_of(up, up) + gram_of(down, down) - 2.0 * gram_of(up, down);
    double t = eta > 1e-15 ? gap / eta : avail;
    t = std::min(t, avail);

    if (up == kBudget) budget += t; else alpha[up] += t;
    if (down == kBudget) {
      budget = t == avail ? 0.0 : budget - t;
    } else {
      alpha[down] = t == avail ? 0.0 : alpha[down] - t;
    }
    for (std::size_t r = 0; r < n; ++r) grad[r] -= t * (gram_of(r, up) - gram_of(r, down));
  }
  out.sweeps = (steps + n - 1) / n;

  const std::size_t dim = cs.rows().front().dpsi.size();
  out.w.assign(dim, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    if (alpha[r] != 0.0)
      for (std::size_t i = 0; i < dim; ++i) out.w[i] += alpha[r] * cs.rows()[r].dpsi[i];
  double slack = 0.0;
  for (const auto &row : cs.rows()) slack = std::max(slack, row.loss - dot(out.w, row.dpsi));
  out.slack = slack;
  for (double v : out.w)
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericalInstability, "qp_solve: non-finite weights");
  return out;
}

namespace {

double half_norm_sq(const WeightPack &w) {
  const auto d = w.data();
  return 0.5 * dot(d, d);
}

struct Violator {
  DecodeResult result;
  double loss{0.0};
};

std::vector<Violator> find_violators(const WeightPack &w, std::span<const LatentExample> examples,
                                     const Hyperparams &hp) {
  std::vector<Violator> out(examples.size());
  detail::parallel_for(examples.size(), hp.n_threads, [&](std::size_t i) {
    const auto &seq = *examples[i].seq;
    out[i].result = decode_loss_augmented(w, seq, *seq.actions, *seq.activity, hp.lambda_loss, true);
    out[i].loss = loss_delta(*seq.actions, out[i].result.actions, *seq.activity,
                             out[i].result.activity, hp.lambda_loss);
  });
  return out;
}

JointAssignment gold_assignment(const LatentExample &ex) {
  return JointAssignment{*ex.seq->activity, *ex.seq->actions,
                         std::vector<std::size_t>(ex.latents.begin(), ex.latents.end())};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

SsvmResult solve_structured_svm(std::span<const LatentExample> examples, const LabelSpace &space,
                                const Hyperparams &hp, const TrainLogger &log, std::size_t cccp_iter,
                                std::optional<double> target) {
  hp.validate();
  if (examples.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  const auto t0 = Clock::now();
  const std::size_t n = examples.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector gold_avg(space.weight_dim(), 0.0);
  for (const auto &ex : examples) {
    if (!ex.seq || !ex.seq->labeled())
      throw Error(ErrorCode::MissingLabels, "training example without gold labels");
    accumulate_feature_map(*ex.seq, gold_assignment(ex), space, inv_n, gold_avg);
  }

  SsvmResult res{WeightPack(space), 0.0, {}, 0, false, 0, {}, hp.epsilon_cp, 0.0};
  ConstraintSet cs;
  double eps = hp.epsilon_cp;
  for (std::size_t it = 1; it <= hp.max_cp_iters; ++it) {
    res.cp_iterations = it;
    const auto violators = find_violators(res.weights, examples, hp);
    ConstraintSet::Row row{gold_avg, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      accumulate_feature_map(*examples[i].seq, to_assignment(violators[i].result), space, -inv_n,
                             row.dpsi);
      row.loss += inv_n * violators[i].loss;
    }
    const double violation = row.loss - dot(res.weights.data(), row.dpsi);
    if (log)
      log(TrainLogRecord{"cp", cccp_iter, it, half_norm_sq(res.weights) + hp.c_reg * res.slack,
                         violation, res.slack, row.loss, seconds_since(t0)});
    // The averaged hinge at the current weights is exactly `violation`.
    res.objective = half_norm_sq(res.weights) + hp.c_reg * violation;
    if (violation <= res.slack + eps) {
      res.converged = true;
      if (!target || res.objective <= *target || eps * kRefineFactor < kRefineFloor) break;
      eps *= kRefineFactor;
      if (violation <= res.slack + eps) continue;
    }
    res.row_losses.push_back(row.loss);
    cs.add(std::move(row));
    const auto qp = qp_solve(cs, hp.c_reg);
    if (!qp.converged) ++res.qp_failures;
    res.weights = unflatten(qp.w, space);
    res.slack = qp.slack;
  }
  res.duals = cs.duals();
  res.epsilon = eps;
  return res;
}

double fixed_latent_objective(const WeightPack &w, std::span<const LatentExample> examples,
                              const Hyperparams &hp) {
  if (examples.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  const auto violators = find_violators(w, examples, hp);
  double hinge = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    hinge += violators[i].result.score - joint_score(w, *examples[i].seq, gold_assignment(examples[i]));
  return half_norm_sq(w) + hp.c_reg * hinge / static_cast<double>(examples.size());
}

SurrogateEval surrogate_objective(const WeightPack &w, std::span<const SegmentSequence> data,
                                  const Hyperparams &hp) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training examples");
  const std::size_t n = data.size();
  std::vector<double> hinge(n);
  SurrogateEval out;
  out.completions.resize(n);
  detail::parallel_for(n, hp.n_threads, [&](std::size_t i) {
    const auto &seq = data[i];
    if (!seq.labeled()) throw Error(ErrorCode::MissingLabels, "example '" + seq.id + "' is unlabeled");
    const auto aug = decode_loss_augmented(w, seq, *seq.actions, *seq.activity, hp.lambda_loss);
    auto comp = complete_latent(w, seq, *seq.actions, *seq.activity);
    hinge[i] = aug.score - comp.score;
    out.completions[i] = std::move(comp.latents);
  });
  double total = 0.0;
  for (double h : hinge) total += h;
  out.objective = half_norm_sq(w) + hp.c_reg * total / static_cast<double>(n);
  return out;
}

namespace {

LatentPaths initial_latents(std::span<const SegmentSequence> data, const Hyperparams &hp,
                            const TrainOptions &options) {
  switch (hp.init_strategy) {
  case InitStrategy::Random: return init_random(data, hp.n_latent, hp.rng_seed);
  case InitStrategy::KmeansFeatures: return init_kmeans_features(data, hp.n_latent, hp.rng_seed);
  case InitStrategy::KmeansCategorical: {
    if (!options.categories)
      throw Error(ErrorCode::MissingLabels, "kmeans_categorical initialization needs categorical labels");
    const auto &cats = *options.categories;
    if (cats.size() != data.size())
      throw dimension_mismatch("categorical label sequences", data.size(), cats.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      if (cats[i].size() != data[i].length())
        throw dimension_mismatch("categorical labels of '" + data[i].id + "'", data[i].length(),
                                 cats[i].size());
    return init_kmeans_categorical(cats, options.n_categories, hp.n_latent, hp.rng_seed);
  }
  }
  throw Error(ErrorCode::InvalidHyperparams, "unknown init strategy");
}

std::vector<LatentExample> bind_latents(std::span<const SegmentSequence> data, const LatentPaths &latents) {
  std::vector<LatentExample> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back({&data[i], latents[i]});
  return out;
}

} // namespace

TrainResult train(std::span<const SegmentSequence> data, const LabelSpace &space,
                  const Hyperparams &hp, const TrainOptions &options) {
  hp.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  LabelSpace model_space = space;
  model_space.n_latent = hp.n_latent;
  model_space.validate();
  for (const auto &seq : data) {
    if (!seq.labeled())
      throw Error(ErrorCode::MissingLabels, "training sequence '" + seq.id + "' lacks gold labels");
    validate_sequence(seq, model_space);
  }

  const auto t0 = Clock::now();
  TrainReport report;
  LatentPaths latents = initial_latents(data, hp, options);
  for (auto &path : latents)
    for (auto &z : path) z = std::min(z, hp.n_latent - 1);

  std::optional<SsvmResult> current;
  SurrogateEval eval;
  for (std::size_t t = 1; t <= hp.max_cccp_iters; ++t) {
    report.cccp_iterations = t;
    if (t > 1) {
      if (eval.completions == latents) {
        report.converged = true;
        report.stop_reason = "latents_unchanged";
        break;
      }
      latents = eval.completions;
    }
    const auto examples = bind_latents(data, latents);
    // latents are argmax_z at the previous weights, so the previous
    // surrogate value is this step's fixed-latent bound at those weights.
    std::optional<double> target;
    if (t > 1) target = report.cccp_objective_per_iter.back();
    auto m = solve_structured_svm(examples, model_space, hp, options.log, t, target);

    if (t > 1) {
      const double bound = fixed_latent_objective(m.weights, examples, hp);
      if (bound > *target) {
        report.converged = true;
        report.stop_reason = "no_descent";
        break;
      }
    }

    report.final_latents = latents;
    current = std::move(m);
    eval = surrogate_objective(current->weights, data, hp);
    report.cccp_objective_per_iter.push_back(eval.objective);
    report.cp_iterations_per_cccp.push_back(current->cp_iterations);
    report.constraint_losses_per_cccp.push_back(current->row_losses);
    report.weights_per_iter.push_back(flatten(current->weights));
    if (options.log)
      options.log(TrainLogRecord{"cccp", t, current->cp_iterations, eval.objective, 0.0,
                                 current->slack, 0.0, seconds_since(t0)});

    const auto &objs = report.cccp_objective_per_iter;
    if (objs.size() >= 2) {
      const double prev = objs[objs.size() - 2];
      if (prev - objs.back() < kCccpRelativeTolerance * std::abs(prev)) {
        report.converged = true;
        report.stop_reason = "objective_stalled";
        break;
      }
    }
  }
  if (!report.converged) report.stop_reason = "max_cccp_iters";

  report.final_slack = current->slack;
  report.final_duals = current->duals;
  report.wall_time = seconds_since(t0);
  return TrainResult{std::move(current->weights), std::move(report)};
}

} // namespace lhc
