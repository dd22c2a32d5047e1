#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lhc/core.hpp"

namespace lhc {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kCategoriesFormatVersion = 1;

/// A labeled corpus. `space.n_latent` is not a property of the data and is
/// always 1 in a dataset; models pick their own.
struct Dataset {
  LabelSpace space;
  std::vector<std::string> action_names;
  std::vector<std::string> activity_names;
  std::vector<std::string> subjects;
  std::vector<SegmentSequence> records;

  friend bool operator==(const Dataset &, const Dataset &) = default;
};

/// Checks the header tables and every record; throws ValidationError naming
/// the offending record id.
void validate_dataset(const Dataset &ds);

/// Line-delimited JSON: one header object, then one object per record.
/// See docs/formats.md for the grammar.
void write_dataset(const Dataset &ds, std::ostream &out);
[[nodiscard]] Dataset read_dataset(std::istream &in, const std::string &source = "<stream>");
void save_dataset(const Dataset &ds, const std::filesystem::path &path);
[[nodiscard]] Dataset load_dataset(const std::filesystem::path &path);

/// Records whose subject is (or is not) `subject`, keeping the header.
[[nodiscard]] Dataset select_subjects(const Dataset &ds, std::span<const std::string> subjects,
                                      bool include);

inline constexpr double kStdFloor = 1e-8;

/// Per-dimension affine standardization of segment and global features.
/// Standard deviations are population deviations floored at kStdFloor.
struct Standardizer {
  Vector segment_mean, segment_std;
  Vector global_mean, global_std;

  [[nodiscard]] Vector transform_segment(std::span<const double> x) const;
  [[nodiscard]] Vector transform_global(std::span<const double> x) const;
  [[nodiscard]] Vector inverse_segment(std::span<const double> x) const;
  [[nodiscard]] Vector inverse_global(std::span<const double> x) const;

  friend bool operator==(const Standardizer &, const Standardizer &) = default;
};

/// Throws EmptySplit on an empty training split.
[[nodiscard]] Standardizer fit_standardizer(std::span<const SegmentSequence> train);
[[nodiscard]] std::vector<SegmentSequence> apply_standardizer(const Standardizer &s,
                                                              std::span<const SegmentSequence> data);
[[nodiscard]] Dataset apply_standardizer(const Standardizer &s, const Dataset &ds);

/// Splits T frames into ceil(T / seg_len) contiguous windows (the last may
/// be shorter) and summarizes each by its per-dimension mean.
[[nodiscard]] std::vector<Vector> uniform_segmentation(std::span<const Vector> frames,
                                                       std::size_t seg_len);

/// Global feature for datasets without one: mean of the segment vectors
/// followed by K / k_max. Its dimension is D + 1.
[[nodiscard]] Vector pooled_global_feature(std::span<const Vector> segments, std::size_t k_max);

struct SyntheticSpec {
  /// n_latent here is the number of emission modes per action.
  LabelSpace space;
  /// transitions[A][y'][y] = P(y_k = y | y_{k-1} = y', activity A).
  std::vector<std::vector<Vector>> transitions;
  /// emission_means[y][z], each of length dim_segment.
  std::vector<std::vector<Vector>> emission_means;
  double noise_scale{0.3};
  std::size_t min_length{6};
  std::size_t max_length{14};
  std::size_t n_sequences{120};
  std::size_t n_subjects{4};
  std::uint64_t seed{0};

  /// Throws InvalidSpec.
  void validate() const;
};

/// N_y=4, N_z=2, N_A=3, D=8, D0=3, noise 0.3, 120 sequences over 4 subjects.
[[nodiscard]] SyntheticSpec default_synthetic_spec(std::uint64_t seed = 0);

/// Samples an activity uniformly, a first action uniformly, then actions from
/// the activity's transition matrix; each segment gets a uniform latent mode
/// and emits mean(y, z) + noise. The global vector is the activity one-hot
/// plus noise, so dim_global must equal n_activities.
[[nodiscard]] Dataset synth_generate(const SyntheticSpec &spec);

/// Trained model plus everything needed to apply it to raw features.
struct Model {
  WeightPack weights;
  std::optional<Standardizer> standardizer;
  std::vector<std::string> action_names;
  std::vector<std::string> activity_names;
};

void save_model(const Model &model, const std::filesystem::path &path);
[[nodiscard]] Model load_model(const std::filesystem::path &path);
[[nodiscard]] std::string model_to_string(const Model &model);
[[nodiscard]] Model model_from_string(const std::string &text);

/// Per-segment categorical labels keyed by record id (side channel for the
/// categorical latent initializer).
struct CategoricalLabels {
  std::size_t n_categories{0};
  std::vector<std::string> names;
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> labels;
};

void save_categories(const CategoricalLabels &cats, const std::filesystem::path &path);
[[nodiscard]] CategoricalLabels load_categories(const std::filesystem::path &path);
/// Reorders `cats` to follow ds.records; throws ValidationError on missing
/// ids or length mismatches.
[[nodiscard]] std::vector<std::vector<std::size_t>> align_categories(const CategoricalLabels &cats,
                                                                     const Dataset &ds);

/// Converts a CSV feature table with columns
///   sequence_id,subject,activity,action,f_1,...,f_D
/// (one row per segment, rows of a sequence contiguous and in order) into a
/// dataset. Label names are assigned ids in order of first appearance and
/// the global feature is pooled_global_feature with k_max = longest sequence.
[[nodiscard]] Dataset convert_feature_table(std::istream &in, const std::string &source = "<csv>");

} // namespace lhc
