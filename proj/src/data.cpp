#include "lhc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "random.hpp"

namespace lhc {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string &source, std::size_t line, const std::string &msg) {
  throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + msg);
}

json space_to_json(const LabelSpace &s, bool with_latent) {
  json j{{"n_actions", s.n_actions},
         {"n_activities", s.n_activities},
         {"dim_segment", s.dim_segment},
         {"dim_global", s.dim_global}};
  if (with_latent) j["n_latent"] = s.n_latent;
  return j;
}

LabelSpace space_from_json(const json &j, bool with_latent) {
  LabelSpace s;
  s.n_actions = j.at("n_actions").get<std::size_t>();
  s.n_activities = j.at("n_activities").get<std::size_t>();
  s.dim_segment = j.at("dim_segment").get<std::size_t>();
  s.dim_global = j.at("dim_global").get<std::size_t>();
  s.n_latent = with_latent ? j.at("n_latent").get<std::size_t>() : 1;
  return s;
}

json record_to_json(const SegmentSequence &r) {
  json j{{"id", r.id}, {"subject", r.subject}};
  j["activity"] = r.activity ? json(*r.activity) : json(nullptr);
  j["actions"] = r.actions ? json(*r.actions) : json(nullptr);
  j["segments"] = r.segments;
  j["global"] = r.global;
  return j;
}

SegmentSequence record_from_json(const json &j) {
  SegmentSequence r;
  r.id = j.at("id").get<std::string>();
  r.subject = j.value("subject", std::string{});
  if (j.contains("activity") && !j["activity"].is_null()) r.activity = j["activity"].get<std::size_t>();
  if (j.contains("actions") && !j["actions"].is_null())
    r.actions = j["actions"].get<std::vector<std::size_t>>();
  r.segments = j.at("segments").get<std::vector<Vector>>();
  r.global = j.at("global").get<Vector>();
  return r;
}

json parse_line(const std::string &text, const std::string &source, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    parse_fail(source, line, "offset " + std::to_string(e.byte) + ": " + e.what());
  }
}

void check_header(const json &h, const std::string &format, int version, const std::string &source) {
  if (!h.is_object() || h.value("format", std::string{}) != format)
    parse_fail(source, 1, "missing or wrong header (expected format '" + format + "')");
  const int v = h.value("version", -1);
  if (v != version)
    throw Error(ErrorCode::SchemaVersionUnsupported,
                source + ": " + format + " version " + std::to_string(v) + " is not supported (expected " +
                    std::to_string(version) + ")");
}

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return in;
}

} // namespace

void validate_dataset(const Dataset &ds) {
  auto fail = [](const std::string &m) { throw Error(ErrorCode::ValidationError, m); };
  try {
    ds.space.validate();
  } catch (const Error &e) {
    fail(std::string("header: ") + e.what());
  }
  if (ds.action_names.size() != ds.space.n_actions)
    fail("header: " + std::to_string(ds.action_names.size()) + " action names for " +
         std::to_string(ds.space.n_actions) + " actions");
  if (ds.activity_names.size() != ds.space.n_activities)
    fail("header: " + std::to_string(ds.activity_names.size()) + " activity names for " +
         std::to_string(ds.space.n_activities) + " activities");
  const std::set<std::string> subjects(ds.subjects.begin(), ds.subjects.end());
  std::set<std::string> ids;
  for (const auto &r : ds.records) {
    try {
      validate_sequence(r, ds.space);
    } catch (const Error &e) {
      fail("record '" + r.id + "': " + std::string(to_string(e.code())) + ": " + e.what());
    }
    if (!subjects.contains(r.subject))
      fail("record '" + r.id + "': subject '" + r.subject + "' not listed in header");
    if (!ids.insert(r.id).second) fail("record '" + r.id + "': duplicate id");
  }
}

void write_dataset(const Dataset &ds, std::ostream &out) {
  json header{{"format", "lhc-dataset"},
              {"version", kDatasetFormatVersion},
              {"space", space_to_json(ds.space, false)},
              {"action_names", ds.action_names},
              {"activity_names", ds.activity_names},
              {"subjects", ds.subjects}};
  out << header.dump() << '\n';
  for (const auto &r : ds.records) out << record_to_json(r).dump() << '\n';
}

Dataset read_dataset(std::istream &in, const std::string &source) {
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(text, source, line);
    try {
      if (!have_header) {
        check_header(j, "lhc-dataset", kDatasetFormatVersion, source);
        ds.space = space_from_json(j.at("space"), false);
        ds.action_names = j.at("action_names").get<std::vector<std::string>>();
        ds.activity_names = j.at("activity_names").get<std::vector<std::string>>();
        ds.subjects = j.at("subjects").get<std::vector<std::string>>();
        have_header = true;
      } else {
        ds.records.push_back(record_from_json(j));
      }
    } catch (const json::exception &e) {
      parse_fail(source, line, e.what());
    }
  }
  if (!have_header) parse_fail(source, line, "empty file (no header record)");
  validate_dataset(ds);
  return ds;
}

void save_dataset(const Dataset &ds, const std::filesystem::path &path) {
  auto out = open_out(path);
  write_dataset(ds, out);
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path &path) {
  auto in = open_in(path);
  return read_dataset(in, path.string());
}

Dataset select_subjects(const Dataset &ds, std::span<const std::string> subjects, bool include) {
  const std::set<std::string> keep(subjects.begin(), subjects.end());
  Dataset out = ds;
  out.records.clear();
  for (const auto &r : ds.records)
    if (keep.contains(r.subject) == include) out.records.push_back(r);
  return out;
}

// --- standardization -------------------------------------------------------

namespace {

void fit_block(const std::vector<std::span<const double>> &rows, Vector &mean, Vector &sd) {
  const std::size_t dim = rows.front().size();
  const double n = static_cast<double>(rows.size());
  mean.assign(dim, 0.0);
  sd.assign(dim, 0.0);
  for (const auto &r : rows)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += r[d];
  for (auto &m : mean) m /= n;
  for (const auto &r : rows)
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
  for (auto &s : sd) s = std::max(std::sqrt(s / n), kStdFloor);
}

Vector affine(std::span<const double> x, const Vector &mean, const Vector &sd, bool inverse) {
  if (x.size() != mean.size()) throw dimension_mismatch("standardizer input", mean.size(), x.size());
  Vector out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d)
    out[d] = inverse ? x[d] * sd[d] + mean[d] : (x[d] - mean[d]) / sd[d];
  return out;
}

} // namespace

Vector Standardizer::transform_segment(std::span<const double> x) const {
  return affine(x, segment_mean, segment_std, false);
}
Vector Standardizer::transform_global(std::span<const double> x) const {
  return affine(x, global_mean, global_std, false);
}
Vector Standardizer::inverse_segment(std::span<const double> x) const {
  return affine(x, segment_mean, segment_std, true);
}
Vector Standardizer::inverse_global(std::span<const double> x) const {
  return affine(x, global_mean, global_std, true);
}

Standardizer fit_standardizer(std::span<const SegmentSequence> train) {
  if (train.empty()) throw Error(ErrorCode::EmptySplit, "cannot fit a standardizer on an empty split");
  std::vector<std::span<const double>> segs, globals;
  for (const auto &seq : train) {
    for (const auto &x : seq.segments) segs.emplace_back(x);
    globals.emplace_back(seq.global);
  }
  if (segs.empty()) throw Error(ErrorCode::EmptySplit, "training split has no segments");
  Standardizer s;
  fit_block(segs, s.segment_mean, s.segment_std);
  fit_block(globals, s.global_mean, s.global_std);
  return s;
}

std::vector<SegmentSequence> apply_standardizer(const Standardizer &s,
                                                std::span<const SegmentSequence> data) {
  std::vector<SegmentSequence> out(data.begin(), data.end());
  for (auto &seq : out) {
    for (auto &x : seq.segments) x = s.transform_segment(x);
    seq.global = s.transform_global(seq.global);
  }
  return out;
}

Dataset apply_standardizer(const Standardizer &s, const Dataset &ds) {
  Dataset out = ds;
  out.records = apply_standardizer(s, ds.records);
  return out;
}

// --- segmentation and pooled globals ---------------------------------------

std::vector<Vector> uniform_segmentation(std::span<const Vector> frames, std::size_t seg_len) {
  if (frames.empty()) throw Error(ErrorCode::EmptyInput, "uniform_segmentation: no frames");
  if (seg_len == 0) throw Error(ErrorCode::InvalidSpec, "uniform_segmentation: seg_len must be >= 1");
  const std::size_t dim = frames.front().size();
  std::vector<Vector> out;
  for (std::size_t start = 0; start < frames.size(); start += seg_len) {
    const std::size_t end = std::min(frames.size(), start + seg_len);
    Vector mean(dim, 0.0);
    for (std::size_t t = start; t < end; ++t) {
      if (frames[t].size() != dim) throw dimension_mismatch("frame", dim, frames[t].size());
      for (std::size_t d = 0; d < dim; ++d) mean[d] += frames[t][d];
    }
    for (auto &v : mean) v /= static_cast<double>(end - start);
    out.push_back(std::move(mean));
  }
  return out;
}

Vector pooled_global_feature(std::span<const Vector> segments, std::size_t k_max) {
  if (segments.empty()) throw Error(ErrorCode::EmptyInput, "pooled_global_feature: no segments");
  if (k_max < segments.size())
    throw Error(ErrorCode::InvalidSpec, "pooled_global_feature: k_max smaller than K");
  const std::size_t dim = segments.front().size();
  Vector g(dim + 1, 0.0);
  for (const auto &x : segments) {
    if (x.size() != dim) throw dimension_mismatch("segment", dim, x.size());
    for (std::size_t d = 0; d < dim; ++d) g[d] += x[d];
  }
  for (std::size_t d = 0; d < dim; ++d) g[d] /= static_cast<double>(segments.size());
  g[dim] = static_cast<double>(segments.size()) / static_cast<double>(k_max);
  return g;
}

// --- synthetic data --------------------------------------------------------

void SyntheticSpec::validate() const {
  auto fail = [](const std::string &m) { throw Error(ErrorCode::InvalidSpec, "synthetic spec: " + m); };
  try {
    space.validate();
  } catch (const Error &e) {
    fail(e.what());
  }
  if (space.dim_global != space.n_activities) fail("dim_global must equal n_activities");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) fail("noise scale must be >= 0");
  if (min_length == 0 || min_length > max_length) fail("need 1 <= min_length <= max_length");
  if (n_subjects == 0) fail("n_subjects must be >= 1");
  if (transitions.size() != space.n_activities) fail("one transition matrix per activity required");
  for (const auto &m : transitions) {
    if (m.size() != space.n_actions) fail("transition matrix must be N_y x N_y");
    for (const auto &row : m) {
      if (row.size() != space.n_actions) fail("transition matrix must be N_y x N_y");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) fail("transition probabilities must be >= 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) fail("transition rows must sum to 1");
    }
  }
  if (emission_means.size() != space.n_actions) fail("emission means must be N_y x N_z");
  for (const auto &per_action : emission_means) {
    if (per_action.size() != space.n_latent) fail("emission means must be N_y x N_z");
    for (const auto &m : per_action)
      if (m.size() != space.dim_segment) fail("emission mean has wrong dimension");
  }
}

SyntheticSpec default_synthetic_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.space = LabelSpace{4, 2, 3, 8, 3};
  spec.seed = seed;
  const auto ny = spec.space.n_actions;
  // Activity a mostly steps from y' to (y' + a + 1) mod N_y.
  spec.transitions.assign(spec.space.n_activities, std::vector<Vector>(ny, Vector(ny, 0.1)));
  for (std::size_t a = 0; a < spec.space.n_activities; ++a)
    for (std::size_t yp = 0; yp < ny; ++yp) spec.transitions[a][yp][(yp + a + 1) % ny] += 0.6;
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  spec.emission_means.assign(ny, std::vector<Vector>(spec.space.n_latent, Vector(spec.space.dim_segment)));
  for (auto &per_action : spec.emission_means)
    for (auto &m : per_action)
      for (auto &v : m) v = 1.5 * detail::normal(rng);
  return spec;
}

Dataset synth_generate(const SyntheticSpec &spec) {
  spec.validate();
  const auto &sp = spec.space;
  std::mt19937_64 rng(spec.seed);
  Dataset ds;
  ds.space = sp;
  ds.space.n_latent = 1;
  for (std::size_t y = 0; y < sp.n_actions; ++y) ds.action_names.push_back("action" + std::to_string(y));
  for (std::size_t a = 0; a < sp.n_activities; ++a)
    ds.activity_names.push_back("activity" + std::to_string(a));
  for (std::size_t s = 0; s < spec.n_subjects; ++s) ds.subjects.push_back("subject" + std::to_string(s + 1));

  const Vector uniform_actions(sp.n_actions, 1.0 / static_cast<double>(sp.n_actions));
  for (std::size_t i = 0; i < spec.n_sequences; ++i) {
    SegmentSequence seq;
    char id[32];
    std::snprintf(id, sizeof id, "seq%05zu", i);
    seq.id = id;
    seq.subject = ds.subjects[i % spec.n_subjects];
    const std::size_t a = detail::uniform_index(rng, sp.n_activities);
    const std::size_t len =
        spec.min_length + detail::uniform_index(rng, spec.max_length - spec.min_length + 1);
    std::vector<std::size_t> actions(len);
    for (std::size_t k = 0; k < len; ++k) {
      actions[k] = k == 0 ? detail::categorical(rng, uniform_actions)
                          : detail::categorical(rng, spec.transitions[a][actions[k - 1]]);
      const std::size_t z = detail::uniform_index(rng, sp.n_latent);
      Vector x = spec.emission_means[actions[k]][z];
      for (auto &v : x) v += spec.noise_scale * detail::normal(rng);
      seq.segments.push_back(std::move(x));
    }
    seq.global.assign(sp.n_activities, 0.0);
    seq.global[a] = 1.0;
    for (auto &v : seq.global) v += spec.noise_scale * detail::normal(rng);
    seq.actions = std::move(actions);
    seq.activity = a;
    ds.records.push_back(std::move(seq));
  }
  return ds;
}

// --- model container -------------------------------------------------------

namespace {

json standardizer_to_json(const Standardizer &s) {
  return json{{"segment_mean", s.segment_mean},
              {"segment_std", s.segment_std},
              {"global_mean", s.global_mean},
              {"global_std", s.global_std}};
}

Standardizer standardizer_from_json(const json &j) {
  Standardizer s;
  s.segment_mean = j.at("segment_mean").get<Vector>();
  s.segment_std = j.at("segment_std").get<Vector>();
  s.global_mean = j.at("global_mean").get<Vector>();
  s.global_std = j.at("global_std").get<Vector>();
  return s;
}

} // namespace

std::string model_to_string(const Model &m) {
  json j{{"format", "lhc-model"},
         {"version", kModelFormatVersion},
         {"space", space_to_json(m.weights.space(), true)},
         {"weights", flatten(m.weights)},
         {"action_names", m.action_names},
         {"activity_names", m.activity_names}};
  j["standardizer"] = m.standardizer ? standardizer_to_json(*m.standardizer) : json(nullptr);
  return j.dump(1) + "\n";
}

Model model_from_string(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::ParseError, "model: offset " + std::to_string(e.byte) + ": " + e.what());
  }
  check_header(j, "lhc-model", kModelFormatVersion, "model");
  try {
    const auto space = space_from_json(j.at("space"), true);
    space.validate();
    Model m{unflatten(j.at("weights").get<Vector>(), space), std::nullopt,
            j.at("action_names").get<std::vector<std::string>>(),
            j.at("activity_names").get<std::vector<std::string>>()};
    if (j.contains("standardizer") && !j["standardizer"].is_null()) {
      m.standardizer = standardizer_from_json(j["standardizer"]);
      const auto &s = *m.standardizer;
      if (s.segment_mean.size() != space.dim_segment || s.segment_std.size() != space.dim_segment ||
          s.global_mean.size() != space.dim_global || s.global_std.size() != space.dim_global)
        throw Error(ErrorCode::ValidationError, "model: standardizer dimensions disagree with space");
    }
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::ParseError, std::string("model: ") + e.what());
  }
}

void save_model(const Model &model, const std::filesystem::path &path) {
  auto out = open_out(path);
  out << model_to_string(model);
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

Model load_model(const std::filesystem::path &path) {
  auto in = open_in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_string(buf.str());
}

// --- categorical side channel ----------------------------------------------

void save_categories(const CategoricalLabels &cats, const std::filesystem::path &path) {
  auto out = open_out(path);
  out << json{{"format", "lhc-categories"},
              {"version", kCategoriesFormatVersion},
              {"n_categories", cats.n_categories},
              {"names", cats.names}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < cats.ids.size(); ++i)
    out << json{{"id", cats.ids[i]}, {"categories", cats.labels[i]}}.dump() << '\n';
}

CategoricalLabels load_categories(const std::filesystem::path &path) {
  auto in = open_in(path);
  const auto source = path.string();
  CategoricalLabels cats;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_line(text, source, line);
    try {
      if (!have_header) {
        check_header(j, "lhc-categories", kCategoriesFormatVersion, source);
        cats.n_categories = j.at("n_categories").get<std::size_t>();
        cats.names = j.value("names", std::vector<std::string>{});
        have_header = true;
      } else {
        cats.ids.push_back(j.at("id").get<std::string>());
        cats.labels.push_back(j.at("categories").get<std::vector<std::size_t>>());
        for (auto c : cats.labels.back())
          if (c >= cats.n_categories)
            throw Error(ErrorCode::LabelOutOfRange, source + ":" + std::to_string(line) +
                                                        ": category " + std::to_string(c) +
                                                        " out of range");
      }
    } catch (const json::exception &e) {
      parse_fail(source, line, e.what());
    }
  }
  if (!have_header) parse_fail(source, line, "empty file (no header record)");
  return cats;
}

std::vector<std::vector<std::size_t>> align_categories(const CategoricalLabels &cats, const Dataset &ds) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cats.ids.size(); ++i) index[cats.ids[i]] = i;
  std::vector<std::vector<std::size_t>> out;
  for (const auto &r : ds.records) {
    const auto it = index.find(r.id);
    if (it == index.end())
      throw Error(ErrorCode::ValidationError, "record '" + r.id + "': no categorical labels");
    const auto &labels = cats.labels[it->second];
    if (labels.size() != r.length())
      throw Error(ErrorCode::ValidationError, "record '" + r.id + "': " + std::to_string(labels.size()) +
                                                  " categorical labels for " +
                                                  std::to_string(r.length()) + " segments");
    out.push_back(labels);
  }
  return out;
}

// --- CSV converter ---------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t intern(std::vector<std::string> &names, const std::string &name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
  names.push_back(name);
  return names.size() - 1;
}

} // namespace

Dataset convert_feature_table(std::istream &in, const std::string &source) {
  std::string text;
  std::size_t line = 0;
  std::size_t dim = 0;
  Dataset ds;
  std::map<std::string, std::size_t> seen;
  std::string current;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(text);
    if (dim == 0) {
      if (cells.size() < 5 || cells[0] != "sequence_id")
        parse_fail(source, line, "expected header 'sequence_id,subject,activity,action,f_1,...'");
      dim = cells.size() - 4;
      continue;
    }
    if (cells.size() != dim + 4)
      parse_fail(source, line, "expected " + std::to_string(dim + 4) + " columns, got " +
                                   std::to_string(cells.size()));
    Vector x(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const auto &c = cells[4 + d];
      std::size_t used = 0;
      try {
        x[d] = std::stod(c, &used);
      } catch (const std::exception &) {
        used = 0;
      }
      if (used != c.size() || c.empty() || !std::isfinite(x[d]))
        parse_fail(source, line, "column " + std::to_string(5 + d) + ": bad number '" + c + "'");
    }
    const auto &id = cells[0];
    if (id != current) {
      if (seen.contains(id)) parse_fail(source, line, "rows of sequence '" + id + "' are not contiguous");
      seen[id] = ds.records.size();
      current = id;
      SegmentSequence seq;
      seq.id = id;
      seq.subject = cells[1];
      seq.activity = intern(ds.activity_names, cells[2]);
      seq.actions = std::vector<std::size_t>{};
      ds.records.push_back(std::move(seq));
      if (std::find(ds.subjects.begin(), ds.subjects.end(), cells[1]) == ds.subjects.end())
        ds.subjects.push_back(cells[1]);
    }
    auto &seq = ds.records.back();
    if (cells[1] != seq.subject || ds.activity_names[*seq.activity] != cells[2])
      parse_fail(source, line, "subject/activity changes within sequence '" + id + "'");
    seq.actions->push_back(intern(ds.action_names, cells[3]));
    seq.segments.push_back(std::move(x));
  }
  if (dim == 0) parse_fail(source, line, "missing header row");

  std::size_t k_max = 1;
  for (const auto &r : ds.records) k_max = std::max(k_max, r.length());
  for (auto &r : ds.records) r.global = pooled_global_feature(r.segments, k_max);
  ds.space = LabelSpace{std::max<std::size_t>(1, ds.action_names.size()), 1,
                        std::max<std::size_t>(1, ds.activity_names.size()), dim, dim + 1};
  if (ds.records.empty()) {
    ds.action_names.assign(1, "none");
    ds.activity_names.assign(1, "none");
  }
  validate_dataset(ds);
  return ds;
}

} // namespace lhc
