#include "lhc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lhc/inference.hpp"
#include "parallel.hpp"

namespace lhc {

using nlohmann::json;

MetricsReport compute_metrics(std::span<const std::size_t> gold, std::span<const std::size_t> pred,
                              std::size_t n_classes) {
  if (gold.size() != pred.size())
    throw Error(ErrorCode::LengthMismatch, "evaluate: " + std::to_string(gold.size()) + " gold vs " +
                                               std::to_string(pred.size()) + " predicted items");
  if (gold.empty()) throw Error(ErrorCode::EmptyInput, "evaluate: nothing to evaluate");
  MetricsReport m;
  m.total = gold.size();
  m.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= n_classes || pred[i] >= n_classes)
      throw Error(ErrorCode::LabelOutOfRange, "evaluate: label id out of range");
    ++m.confusion[gold[i]][pred[i]];
  }
  std::size_t trace = 0, present = 0;
  m.per_class.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto &pc = m.per_class[c];
    const std::size_t tp = m.confusion[c][c];
    trace += tp;
    for (std::size_t o = 0; o < n_classes; ++o) {
      pc.support += m.confusion[c][o];
      pc.predicted += m.confusion[o][c];
    }
    pc.precision = pc.predicted ? static_cast<double>(tp) / static_cast<double>(pc.predicted) : 0.0;
    pc.recall = pc.support ? static_cast<double>(tp) / static_cast<double>(pc.support) : 0.0;
    pc.f1 = pc.precision + pc.recall > 0.0
                ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                : 0.0;
    if (pc.support == 0) continue;
    ++present;
    m.macro_precision += pc.precision;
    m.macro_recall += pc.recall;
    m.macro_f1 += pc.f1;
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(m.total);
  m.macro_precision /= static_cast<double>(present);
  m.macro_recall /= static_cast<double>(present);
  m.macro_f1 /= static_cast<double>(present);
  return m;
}

Evaluation evaluate(std::span<const DecodeResult> preds, std::span<const SegmentSequence> golds,
                    const LabelSpace &space) {
  if (preds.size() != golds.size())
    throw Error(ErrorCode::LengthMismatch, "evaluate: " + std::to_string(preds.size()) +
                                               " predictions for " + std::to_string(golds.size()) +
                                               " sequences");
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "evaluate: no sequences");
  std::vector<std::size_t> gy, py, ga, pa;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto &g = golds[i];
    if (!g.labeled()) throw Error(ErrorCode::MissingLabels, "evaluate: '" + g.id + "' is unlabeled");
    if (preds[i].actions.size() != g.length())
      throw Error(ErrorCode::LengthMismatch, "evaluate: prediction length differs for '" + g.id + "'");
    gy.insert(gy.end(), g.actions->begin(), g.actions->end());
    py.insert(py.end(), preds[i].actions.begin(), preds[i].actions.end());
    ga.push_back(*g.activity);
    pa.push_back(preds[i].activity);
  }
  return Evaluation{compute_metrics(gy, py, space.n_actions), compute_metrics(ga, pa, space.n_activities)};
}

std::vector<DecodeResult> predict(const Model &model, std::span<const SegmentSequence> data,
                                  std::size_t n_threads) {
  std::vector<SegmentSequence> prepared =
      model.standardizer ? apply_standardizer(*model.standardizer, data)
                         : std::vector<SegmentSequence>(data.begin(), data.end());
  LabelSpace check = model.weights.space();
  for (const auto &seq : prepared) {
    SegmentSequence unlabeled = seq;
    unlabeled.actions.reset();
    unlabeled.activity.reset();
    validate_sequence(unlabeled, check);
  }
  std::vector<DecodeResult> out(prepared.size());
  detail::parallel_for(prepared.size(), n_threads,
                       [&](std::size_t i) { out[i] = decode(model.weights, prepared[i]); });
  return out;
}

Model fit_model(const Dataset &train, const Hyperparams &hp, TrainReport *report,
                const TrainOptions &options) {
  if (train.records.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  const auto standardizer = fit_standardizer(train.records);
  const auto prepared = apply_standardizer(standardizer, train.records);
  auto result = lhc::train(prepared, train.space, hp, options);
  if (report) *report = std::move(result.report);
  return Model{std::move(result.weights), standardizer, train.action_names, train.activity_names};
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

namespace {

SummaryBlock summarize_block(const std::vector<Evaluation> &folds, bool actions) {
  std::vector<double> acc, p, r, f;
  for (const auto &ev : folds) {
    const auto &m = actions ? ev.actions : ev.activities;
    acc.push_back(m.accuracy);
    p.push_back(m.macro_precision);
    r.push_back(m.macro_recall);
    f.push_back(m.macro_f1);
  }
  return SummaryBlock{summarize(acc), summarize(p), summarize(r), summarize(f)};
}

} // namespace

CvReport cross_validate(const Dataset &ds, const Hyperparams &hp, const TrainOptions &options) {
  hp.validate();
  std::set<std::string> present;
  for (const auto &r : ds.records) present.insert(r.subject);
  if (present.size() < 2)
    throw Error(ErrorCode::InsufficientSubjects, "cross-validation needs >= 2 subjects, found " +
                                                     std::to_string(present.size()));
  if (options.categories && options.categories->size() != ds.records.size())
    throw dimension_mismatch("categorical label sequences", ds.records.size(), options.categories->size());

  CvReport cv;
  cv.fold_subjects.assign(present.begin(), present.end());
  const std::size_t n_folds = cv.fold_subjects.size();
  cv.fold_test_indices.resize(n_folds);
  cv.folds.resize(n_folds);

  // Inner training is single-threaded when folds run in parallel.
  Hyperparams inner = hp;
  const std::size_t fold_threads = std::min(detail::resolve_threads(hp.n_threads), n_folds);
  if (fold_threads > 1) inner.n_threads = 1;

  detail::parallel_for(n_folds, fold_threads, [&](std::size_t f) {
    const auto &subject = cv.fold_subjects[f];
    Dataset train = ds, test = ds;
    train.records.clear();
    test.records.clear();
    LatentPaths train_cats;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].subject == subject) {
        cv.fold_test_indices[f].push_back(i);
        test.records.push_back(ds.records[i]);
      } else {
        train.records.push_back(ds.records[i]);
        if (options.categories) train_cats.push_back((*options.categories)[i]);
      }
    }
    TrainOptions fold_options;
    fold_options.n_categories = options.n_categories;
    if (options.categories) fold_options.categories = &train_cats;
    const auto model = fit_model(train, inner, nullptr, fold_options);
    const auto preds = predict(model, test.records, inner.n_threads);
    cv.folds[f] = evaluate(preds, test.records, ds.space);
  });

  cv.actions = summarize_block(cv.folds, true);
  cv.activities = summarize_block(cv.folds, false);
  return cv;
}

double select_c(const Dataset &ds, const Hyperparams &hp, std::span<const double> grid,
                const std::string &validation_subject) {
  if (grid.empty()) throw Error(ErrorCode::InvalidHyperparams, "empty C grid");
  const std::vector<std::string> held{validation_subject};
  const auto train = select_subjects(ds, held, false);
  const auto valid = select_subjects(ds, held, true);
  if (train.records.empty() || valid.records.empty())
    throw Error(ErrorCode::InsufficientSubjects, "validation subject '" + validation_subject +
                                                     "' leaves an empty train or validation split");
  double best_c = grid.front(), best = -1.0;
  for (double c : grid) {
    Hyperparams trial = hp;
    trial.c_reg = c;
    const auto model = fit_model(train, trial);
    const auto ev = evaluate(predict(model, valid.records, hp.n_threads), valid.records, ds.space);
    const double score = 0.5 * (ev.actions.accuracy + ev.activities.accuracy);
    if (score > best) {
      best = score;
      best_c = c;
    }
  }
  return best_c;
}

// --- rendering ---------------------------------------------------------------

namespace {

json metrics_json(const MetricsReport &m, std::span<const std::string> names) {
  json per = json::array();
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto &pc = m.per_class[c];
    per.push_back({{"class", c < names.size() ? names[c] : std::to_string(c)},
                   {"precision", pc.precision},
                   {"recall", pc.recall},
                   {"f1", pc.f1},
                   {"support", pc.support},
                   {"predicted", pc.predicted}});
  }
  return json{{"total", m.total},
              {"accuracy", m.accuracy},
              {"macro_precision", m.macro_precision},
              {"macro_recall", m.macro_recall},
              {"macro_f1", m.macro_f1},
              {"confusion", m.confusion},
              {"per_class", per}};
}

json summary_json(const SummaryBlock &b) {
  auto one = [](const MetricSummary &s) { return json{{"mean", s.mean}, {"std_error", s.std_error}}; };
  return json{{"accuracy", one(b.accuracy)},
              {"precision", one(b.precision)},
              {"recall", one(b.recall)},
              {"f1", one(b.f1)}};
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

void text_block(std::ostringstream &out, const std::string &title, const MetricsReport &m) {
  out << title << ": accuracy " << fixed(m.accuracy) << "  precision " << fixed(m.macro_precision)
      << "  recall " << fixed(m.macro_recall) << "  f1 " << fixed(m.macro_f1) << "  (n=" << m.total
      << ")\n";
}

} // namespace

std::string metrics_to_json(const Evaluation &ev, const Dataset &names) {
  return json{{"actions", metrics_json(ev.actions, names.action_names)},
              {"activities", metrics_json(ev.activities, names.activity_names)}}
             .dump(1) +
         "\n";
}

std::string metrics_to_text(const Evaluation &ev, const Dataset &names) {
  std::ostringstream out;
  text_block(out, "actions", ev.actions);
  text_block(out, "activities", ev.activities);
  out << "\naction confusion (rows = gold, columns = predicted)\n"
      << confusion_grid(ev.actions, names.action_names);
  out << "\nactivity confusion (rows = gold, columns = predicted)\n"
      << confusion_grid(ev.activities, names.activity_names);
  return out.str();
}

std::string cv_to_json(const CvReport &cv, const Dataset &names) {
  json folds = json::array();
  for (std::size_t f = 0; f < cv.folds.size(); ++f)
    folds.push_back({{"test_subject", cv.fold_subjects[f]},
                     {"test_records", cv.fold_test_indices[f]},
                     {"actions", metrics_json(cv.folds[f].actions, names.action_names)},
                     {"activities", metrics_json(cv.folds[f].activities, names.activity_names)}});
  return json{{"folds", folds},
              {"actions", summary_json(cv.actions)},
              {"activities", summary_json(cv.activities)}}
             .dump(1) +
         "\n";
}

std::string cv_to_text(const CvReport &cv) {
  std::ostringstream out;
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    out << "fold " << f + 1 << " (test subject " << cv.fold_subjects[f] << ")\n";
    text_block(out, "  actions", cv.folds[f].actions);
    text_block(out, "  activities", cv.folds[f].activities);
  }
  auto line = [&](const std::string &title, const SummaryBlock &b) {
    out << title << ": accuracy " << fixed(b.accuracy.mean) << " +/- " << fixed(b.accuracy.std_error)
        << "  precision " << fixed(b.precision.mean) << " +/- " << fixed(b.precision.std_error)
        << "  recall " << fixed(b.recall.mean) << " +/- " << fixed(b.recall.std_error) << "  f1 "
        << fixed(b.f1.mean) << " +/- " << fixed(b.f1.std_error) << "\n";
  };
  out << "mean +/- standard error over " << cv.folds.size() << " folds\n";
  line("actions", cv.actions);
  line("activities", cv.activities);
  return out.str();
}

std::string confusion_grid(const MetricsReport &m, std::span<const std::string> names) {
  const std::size_t n = m.confusion.size();
  auto label = [&](std::size_t c) { return c < names.size() ? names[c] : std::to_string(c); };
  std::size_t width = 5;
  for (std::size_t c = 0; c < n; ++c) width = std::max(width, label(c).size());
  for (const auto &row : m.confusion)
    for (auto v : row) width = std::max(width, std::to_string(v).size());
  std::ostringstream out;
  out << std::setw(static_cast<int>(width)) << "" ;
  for (std::size_t c = 0; c < n; ++c) out << ' ' << std::setw(static_cast<int>(width)) << label(c);
  out << '\n';
  for (std::size_t r = 0; r < n; ++r) {
    out << std::setw(static_cast<int>(width)) << label(r);
    for (std::size_t c = 0; c < n; ++c) out << ' ' << std::setw(static_cast<int>(width)) << m.confusion[r][c];
    out << '\n';
  }
  return out.str();
}

std::string confusion_tsv(const MetricsReport &m, std::span<const std::string> names) {
  auto label = [&](std::size_t c) { return c < names.size() ? names[c] : std::to_string(c); };
  std::ostringstream out;
  out << "gold\tpredicted\tcount\n";
  for (std::size_t r = 0; r < m.confusion.size(); ++r)
    for (std::size_t c = 0; c < m.confusion.size(); ++c)
      out << label(r) << '\t' << label(c) << '\t' << m.confusion[r][c] << '\n';
  return out.str();
}

} // namespace lhc
