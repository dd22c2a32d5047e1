#include "lhc/core.hpp"

#include <algorithm>
#include <cmath>

namespace lhc {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
  case ErrorCode::NonFiniteValue: return "NonFiniteValue";
  case ErrorCode::LengthMismatch: return "LengthMismatch";
  case ErrorCode::InvalidHyperparams: return "InvalidHyperparams";
  case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
  case ErrorCode::EmptyDataset: return "EmptyDataset";
  case ErrorCode::MissingLabels: return "MissingLabels";
  case ErrorCode::QpFailure: return "QpFailure";
  case ErrorCode::NumericalInstability: return "NumericalInstability";
  case ErrorCode::DegenerateInput: return "DegenerateInput";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::SchemaVersionUnsupported: return "SchemaVersionUnsupported";
  case ErrorCode::ValidationError: return "ValidationError";
  case ErrorCode::EmptySplit: return "EmptySplit";
  case ErrorCode::InvalidSpec: return "InvalidSpec";
  case ErrorCode::EmptyInput: return "EmptyInput";
  case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error dimension_mismatch(std::string_view what, std::size_t expected, std::size_t actual) {
  return Error(ErrorCode::DimensionMismatch, std::string(what) + ": expected " +
                                                 std::to_string(expected) + ", got " +
                                                 std::to_string(actual));
}

std::size_t LabelSpace::weight_dim() const noexcept { return block_offsets(*this).total; }

void LabelSpace::validate() const {
  if (n_actions == 0 || n_latent == 0 || n_activities == 0 || dim_segment == 0 || dim_global == 0)
    throw Error(ErrorCode::InvalidHyperparams, "label space cardinalities must all be >= 1");
}

namespace {

void check_finite(std::span<const double> v, const std::string &what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw Error(ErrorCode::NonFiniteValue, what + "[" + std::to_string(i) + "] is not finite");
}

} // namespace

void validate_sequence(const SegmentSequence &seq, const LabelSpace &space) {
  const std::string tag = "sequence '" + seq.id + "'";
  if (seq.segments.empty())
    throw dimension_mismatch(tag + " segment count (K >= 1)", 1, 0);
  for (std::size_t k = 0; k < seq.segments.size(); ++k) {
    const auto what = tag + " segment " + std::to_string(k);
    if (seq.segments[k].size() != space.dim_segment)
      throw dimension_mismatch(what, space.dim_segment, seq.segments[k].size());
    check_finite(seq.segments[k], what);
  }
  if (seq.global.size() != space.dim_global)
    throw dimension_mismatch(tag + " global", space.dim_global, seq.global.size());
  check_finite(seq.global, tag + " global");
  if (seq.actions) {
    if (seq.actions->size() != seq.segments.size())
      throw dimension_mismatch(tag + " actions", seq.segments.size(), seq.actions->size());
    for (std::size_t k = 0; k < seq.actions->size(); ++k)
      if ((*seq.actions)[k] >= space.n_actions)
        throw Error(ErrorCode::LabelOutOfRange,
                    tag + " action[" + std::to_string(k) + "] = " +
                        std::to_string((*seq.actions)[k]) + " not in [0, " +
                        std::to_string(space.n_actions) + ")");
  }
  if (seq.activity && *seq.activity >= space.n_activities)
    throw Error(ErrorCode::LabelOutOfRange, tag + " activity = " + std::to_string(*seq.activity) +
                                                " not in [0, " +
                                                std::to_string(space.n_activities) + ")");
}

BlockOffsets block_offsets(const LabelSpace &s) noexcept {
  const std::size_t states = s.n_states();
  BlockOffsets o{};
  o.w1 = 0;
  o.w2 = o.w1 + states * s.dim_segment;
  o.w3 = o.w2 + states;
  o.w4 = o.w3 + states * states;
  o.w5 = o.w4 + s.n_actions * s.n_actions * s.n_activities;
  o.total = o.w5 + s.n_activities * s.dim_global;
  return o;
}

WeightPack::WeightPack(const LabelSpace &space) : space_(space) {
  space_.validate();
  data_.assign(space_.weight_dim(), 0.0);
}

namespace {

std::size_t state(const LabelSpace &s, std::size_t y, std::size_t z) { return y * s.n_latent + z; }

} // namespace

std::span<const double> WeightPack::w1(std::size_t y, std::size_t z) const {
  const auto d = space_.dim_segment;
  return std::span<const double>(data_).subspan(state(space_, y, z) * d, d);
}
std::span<double> WeightPack::w1(std::size_t y, std::size_t z) {
  const auto d = space_.dim_segment;
  return std::span<double>(data_).subspan(state(space_, y, z) * d, d);
}
double WeightPack::w2(std::size_t y, std::size_t z) const {
  return data_[block_offsets(space_).w2 + state(space_, y, z)];
}
double &WeightPack::w2(std::size_t y, std::size_t z) {
  return data_[block_offsets(space_).w2 + state(space_, y, z)];
}
double WeightPack::w3(std::size_t y_prev, std::size_t z_prev, std::size_t y, std::size_t z) const {
  return data_[block_offsets(space_).w3 + state(space_, y_prev, z_prev) * space_.n_states() +
               state(space_, y, z)];
}
double &WeightPack::w3(std::size_t y_prev, std::size_t z_prev, std::size_t y, std::size_t z) {
  return data_[block_offsets(space_).w3 + state(space_, y_prev, z_prev) * space_.n_states() +
               state(space_, y, z)];
}
double WeightPack::w4(std::size_t y_prev, std::size_t y, std::size_t a) const {
  return data_[block_offsets(space_).w4 + (y_prev * space_.n_actions + y) * space_.n_activities + a];
}
double &WeightPack::w4(std::size_t y_prev, std::size_t y, std::size_t a) {
  return data_[block_offsets(space_).w4 + (y_prev * space_.n_actions + y) * space_.n_activities + a];
}
std::span<const double> WeightPack::w5(std::size_t a) const {
  const auto d0 = space_.dim_global;
  return std::span<const double>(data_).subspan(block_offsets(space_).w5 + a * d0, d0);
}
std::span<double> WeightPack::w5(std::size_t a) {
  const auto d0 = space_.dim_global;
  return std::span<double>(data_).subspan(block_offsets(space_).w5 + a * d0, d0);
}

Vector flatten(const WeightPack &weights) {
  return Vector(weights.data().begin(), weights.data().end());
}

WeightPack unflatten(std::span<const double> v, const LabelSpace &space) {
  WeightPack pack(space);
  if (v.size() != pack.data_.size())
    throw dimension_mismatch("flattened weight vector", pack.data_.size(), v.size());
  check_finite(v, "weight");
  std::copy(v.begin(), v.end(), pack.data_.begin());
  return pack;
}

std::string to_string(InitStrategy s) {
  switch (s) {
  case InitStrategy::Random: return "random";
  case InitStrategy::KmeansFeatures: return "kmeans_features";
  case InitStrategy::KmeansCategorical: return "kmeans_categorical";
  }
  return "unknown";
}

InitStrategy parse_init_strategy(const std::string &name) {
  if (name == "random") return InitStrategy::Random;
  if (name == "kmeans_features") return InitStrategy::KmeansFeatures;
  if (name == "kmeans_categorical") return InitStrategy::KmeansCategorical;
  throw Error(ErrorCode::InvalidHyperparams, "unknown init strategy '" + name + "'");
}

void Hyperparams::validate() const {
  auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidHyperparams, m); };
  if (!(c_reg > 0.0) || !std::isfinite(c_reg)) fail("C must be > 0");
  if (!(lambda_loss >= 0.0 && lambda_loss <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(epsilon_cp > 0.0) || !std::isfinite(epsilon_cp)) fail("epsilon must be > 0");
  if (n_latent == 0) fail("n_latent must be >= 1");
  if (max_cccp_iters == 0) fail("max_cccp_iters must be >= 1");
  if (max_cp_iters == 0) fail("max_cp_iters must be >= 1");
}

} // namespace lhc
