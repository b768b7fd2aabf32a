#include "longrisk/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "longrisk/autodiff.hpp"
#include "longrisk/errors.hpp"

namespace longrisk {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

ScenarioMask ScenarioMask::parse(const std::string& text) {
  if (text.empty()) throw ParseError("empty scenario");
  std::size_t i = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == 0) throw ParseError("scenario '" + text + "': expected a duration digit");
  ScenarioMask s;
  s.duration = std::stoi(text.substr(0, i));
  if (s.duration < 0 || s.duration > 4) {
    throw ParseError("scenario '" + text + "': duration must be 0..4");
  }
  if (i == text.size()) {
    s.frequency = Frequency::annual;
  } else if (i + 1 == text.size() && text[i] == '*') {
    s.frequency = Frequency::annual;
  } else if (i + 1 == text.size() && text[i] == '+') {
    s.frequency = Frequency::biennial;
  } else {
    throw ParseError("scenario '" + text + "': expected '<years>', '<years>*' or "
                     "'<years>+'");
  }
  if (s.frequency == Frequency::biennial && s.duration % 2 != 0) {
    throw ParseError("scenario '" + text +
                     "': biennial history needs an even duration");
  }
  return s;
}

std::string ScenarioMask::to_string() const {
  if (duration == 0) return "0";
  return std::to_string(duration) +
         (frequency == Frequency::biennial ? "+" : "*");
}

HistoryMask ScenarioMask::visible() const {
  HistoryMask m;  // offset 0 present by default
  const int step = frequency == Frequency::biennial ? 2 : 1;
  for (int back = step; back <= duration; back += step) {
    m.present[4 - back] = true;
  }
  return m;
}

std::vector<ScenarioMask> parse_scenarios(const std::string& comma_list) {
  std::vector<ScenarioMask> scenarios;
  std::stringstream ss(comma_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) scenarios.push_back(ScenarioMask::parse(tok));
  }
  if (scenarios.empty()) throw ParseError("no scenarios given");
  return scenarios;
}

std::vector<std::size_t> build_pseudo_test_set(
    const std::vector<TrajectorySample>& samples, int target_year, Rng& rng) {
  if (target_year < 1 || target_year > 5) {
    throw ContractError("pseudo test set: target year must be 1..5");
  }
  std::map<int, std::vector<std::size_t>> eligible;  // subject -> sample indices
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].known[target_year - 1]) {
      eligible[samples[i].subject_index].push_back(i);
    }
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(eligible.size());
  for (const auto& [subject, candidates] : eligible) {
    chosen.push_back(candidates[rng.below(candidates.size())]);
  }
  if (chosen.empty()) {
    throw MetricError("no subject has a known label at follow-up year " +
                      std::to_string(target_year));
  }
  return chosen;
}

std::vector<std::size_t> build_concordance_test_set(
    const std::vector<TrajectorySample>& samples, Rng& rng) {
  std::map<int, std::vector<std::size_t>> eligible;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const bool event_in_horizon = s.labels[4] == 1;  // implies known
    if (event_in_horizon || s.known[0]) {
      eligible[s.subject_index].push_back(i);
    }
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(eligible.size());
  for (const auto& [subject, candidates] : eligible) {
    chosen.push_back(candidates[rng.below(candidates.size())]);
  }
  if (chosen.empty()) {
    throw MetricError("no subject is usable for concordance");
  }
  return chosen;
}

SurvivalObservation observation_for(const TrajectorySample& sample,
                                    const SubjectTimeline& timeline,
                                    double five_year_risk) {
  SurvivalObservation obs;
  obs.risk = five_year_risk;
  if (timeline.diagnosis_year && *timeline.diagnosis_year <= sample.now_year + 5) {
    obs.event = true;
    obs.time = std::max(0, *timeline.diagnosis_year - sample.now_year);
  } else {
    obs.event = false;
    obs.time = std::clamp(timeline.last_followup_year - sample.now_year, 0, 5);
  }
  return obs;
}

std::vector<RiskCurve> score_samples(const RiskModel& model,
                                     const EmbeddingCache& cache,
                                     const std::vector<TrajectorySample>& samples,
                                     const ScenarioMask& scenario) {
  std::vector<RiskCurve> curves(samples.size());
  const HistoryMask visible = scenario.visible();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(samples.size()); ++i) {
    ops::NoGradGuard guard;
    auto input = gather_history(cache, samples[static_cast<std::size_t>(i)], visible);
    curves[static_cast<std::size_t>(i)] = model.risk(input.embeddings, input.mask);
  }
  return curves;
}

CellStat CellStat::from_values(std::vector<double> values,
                               std::size_t n_undefined) {
  CellStat c;
  c.values = std::move(values);
  c.n_undefined = n_undefined;
  if (c.values.empty()) {
    c.degenerate_ci = true;
    return c;
  }
  double sum = 0.0;
  for (double v : c.values) sum += v;
  c.mean = sum / static_cast<double>(c.values.size());
  if (c.values.size() < 2) {
    c.ci_lo = c.ci_hi = c.mean;
    c.degenerate_ci = true;
    return c;
  }
  double ss = 0.0;
  for (double v : c.values) ss += (v - c.mean) * (v - c.mean);
  const double sd = std::sqrt(ss / static_cast<double>(c.values.size() - 1));
  const double half = 1.96 * sd / std::sqrt(static_cast<double>(c.values.size()));
  c.ci_lo = c.mean - half;
  c.ci_hi = c.mean + half;
  return c;
}

ScenarioResult evaluate_scenario(const RiskModel& model,
                                 const EmbeddingCache& cache,
                                 const std::vector<SubjectTimeline>& timelines,
                                 const std::vector<TrajectorySample>& samples,
                                 const ScenarioMask& scenario,
                                 std::size_t n_repeats, Rng& rng) {
  if (n_repeats == 0) throw ConfigError("evaluate: n_repeats must be positive");
  ScenarioResult result;
  result.scenario = scenario;

  // risk curves are repeat-independent: score once, resample cheaply
  const std::vector<RiskCurve> curves = score_samples(model, cache, samples, scenario);

  for (int year = 1; year <= 5; ++year) {
    std::vector<double> auc(n_repeats,
                            std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
    for (long long rep = 0; rep < static_cast<long long>(n_repeats); ++rep) {
      Rng rep_rng = rng.child((static_cast<std::uint64_t>(year) << 32) |
                              static_cast<std::uint64_t>(rep));
      try {
        const auto chosen = build_pseudo_test_set(samples, year, rep_rng);
        std::vector<double> scores;
        std::vector<int> labels;
        scores.reserve(chosen.size());
        labels.reserve(chosen.size());
        for (auto idx : chosen) {
          scores.push_back(curves[idx].p[year - 1]);
          labels.push_back(samples[idx].labels[year - 1]);
        }
        auc[rep] = roc_auc(scores, labels);
      } catch (const MetricError&) {
        // undefined repeat: left as NaN, excluded below
      }
    }
    std::vector<double> defined;
    defined.reserve(n_repeats);
    for (double v : auc) {
      if (!std::isnan(v)) defined.push_back(v);
    }
    const std::size_t n_undefined = n_repeats - defined.size();
    if (2 * n_undefined > n_repeats) {
      throw MetricError("scenario " + scenario.to_string() + ", year " +
                        std::to_string(year) + ": " +
                        std::to_string(n_undefined) + " of " +
                        std::to_string(n_repeats) +
                        " pseudo test sets had a single class");
    }
    result.year_auc[year - 1] = CellStat::from_values(std::move(defined), n_undefined);
  }

  {
    std::vector<double> cvals(n_repeats,
                              std::numeric_limits<double>::quiet_NaN());
#pragma omp parallel for schedule(static)
    for (long long rep = 0; rep < static_cast<long long>(n_repeats); ++rep) {
      Rng rep_rng = rng.child((0x6ull << 32) | static_cast<std::uint64_t>(rep));
      try {
        const auto chosen = build_concordance_test_set(samples, rep_rng);
        std::vector<SurvivalObservation> obs;
        obs.reserve(chosen.size());
        for (auto idx : chosen) {
          obs.push_back(observation_for(
              samples[idx],
              timelines[static_cast<std::size_t>(samples[idx].subject_index)],
              curves[idx].p[4]));
        }
        cvals[rep] = concordance_index(obs);
      } catch (const MetricError&) {
      }
    }
    std::vector<double> defined;
    for (double v : cvals) {
      if (!std::isnan(v)) defined.push_back(v);
    }
    const std::size_t n_undefined = n_repeats - defined.size();
    if (2 * n_undefined > n_repeats) {
      throw MetricError("scenario " + scenario.to_string() + ": " +
                        std::to_string(n_undefined) + " of " +
                        std::to_string(n_repeats) +
                        " concordance repeats were undefined");
    }
    result.cindex = CellStat::from_values(std::move(defined), n_undefined);
  }
  return result;
}

namespace {

nlohmann::json cell_json(const CellStat& c) {
  return nlohmann::json{{"mean", c.mean},
                        {"ci_lo", c.ci_lo},
                        {"ci_hi", c.ci_hi},
                        {"n_values", c.values.size()},
                        {"n_undefined", c.n_undefined},
                        {"degenerate_ci", c.degenerate_ci},
                        {"values", c.values}};
}

std::string cell_text(const CellStat& c) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << c.mean;
  if (!c.degenerate_ci) {
    os << " (" << std::setprecision(3) << c.ci_lo << "-" << c.ci_hi << ")";
  }
  return os.str();
}

}  // namespace

std::string MetricReport::render_table() const {
  std::ostringstream os;
  os << std::left << std::setw(10) << "history" << std::setw(22) << "C-index";
  for (int k = 1; k <= 5; ++k) {
    os << std::setw(22) << (std::to_string(k) + "-year");
  }
  os << "\n";
  for (const auto& row : rows) {
    os << std::left << std::setw(10) << row.scenario.to_string();
    os << std::setw(22) << cell_text(row.cindex);
    for (const auto& y : row.years) os << std::setw(22) << cell_text(y);
    os << "\n";
  }
  return os.str();
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json years = nlohmann::json::array();
    for (const auto& y : row.years) years.push_back(cell_json(y));
    rows_json.push_back({{"scenario", row.scenario.to_string()},
                         {"c_index", cell_json(row.cindex)},
                         {"year_auc", years}});
  }
  return nlohmann::json{{"rows", rows_json}, {"provenance", provenance}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport report;
  report.provenance = j.value("provenance", nlohmann::json::object());
  for (const auto& row_json : j.at("rows")) {
    Row row;
    row.scenario = ScenarioMask::parse(row_json.at("scenario").get<std::string>());
    auto parse_cell = [](const nlohmann::json& c) {
      CellStat cell;
      cell.mean = c.value("mean", 0.0);
      cell.ci_lo = c.value("ci_lo", 0.0);
      cell.ci_hi = c.value("ci_hi", 0.0);
      cell.n_undefined = c.value("n_undefined", std::size_t{0});
      cell.degenerate_ci = c.value("degenerate_ci", false);
      cell.values = c.value("values", std::vector<double>{});
      return cell;
    };
    row.cindex = parse_cell(row_json.at("c_index"));
    const auto& years = row_json.at("year_auc");
    for (int k = 0; k < 5; ++k) row.years[k] = parse_cell(years.at(k));
    report.rows.push_back(std::move(row));
  }
  return report;
}

MetricReport evaluate_checkpoint(const RiskModel& model,
                                 const std::vector<SubjectTimeline>& timelines,
                                 const std::vector<ScenarioMask>& scenarios,
                                 std::size_t n_repeats, std::uint64_t seed) {
  model.check_compatible(timelines);
  const auto samples = expand_cohort(timelines);
  EmbeddingCache cache(model, timelines);
  Rng master(seed);

  MetricReport report;
  for (const auto& scenario : scenarios) {
    Rng scenario_rng = master.child(fnv1a("scenario:" + scenario.to_string()));
    auto res = evaluate_scenario(model, cache, timelines, samples, scenario,
                                 n_repeats, scenario_rng);
    report.rows.push_back({res.scenario, res.year_auc, res.cindex});
  }
  report.provenance = {
      {"protocol", "pseudo-test-set resampling"},
      {"aggregation_axis", "repeats"},
      {"n_repeats", n_repeats},
      {"seed", seed},
      {"n_subjects", timelines.size()},
      {"n_samples", samples.size()},
      {"c_index_definition",
       "Harrell comparable-pair concordance on 5-year cumulative risk within "
       "each pseudo test set, averaged over repeats"}};
  return report;
}

MetricReport run_experiment(const std::vector<SubjectTimeline>& timelines,
                            const ModelConfig& base_model,
                            const ExperimentConfig& cfg) {
  if (cfg.scenarios.empty()) throw ConfigError("experiment: no scenarios");
  if (cfg.grid.empty()) throw ConfigError("experiment: empty grid");
  if (cfg.n_splits == 0) throw ConfigError("experiment: n_splits must be positive");

  struct SplitOutcome {
    bool ok = false;
    std::string error;
    std::map<std::string, ScenarioResult> by_scenario;
    nlohmann::json info;
  };
  std::vector<SplitOutcome> outcomes(cfg.n_splits);

  Rng master(cfg.master_seed);
  for (std::size_t split = 0; split < cfg.n_splits; ++split) {
    auto& outcome = outcomes[split];
    try {
      Rng split_rng = master.child(0x591170ull + split);
      auto [train_subjects, test_subjects] =
          split_subjects(timelines, cfg.train_ratio, /*stratify=*/true, split_rng);
      auto [fit_subjects, val_subjects] =
          make_validation_split(timelines, train_subjects, split_rng);

      std::vector<TrainConfig> grid = cfg.grid;
      for (auto& point : grid) {
        point.seed = master.child(0x64D000ull + split).seed();
      }
      auto searched = grid_search(grid, base_model, timelines, fit_subjects,
                                  val_subjects);

      const auto test_samples = [&] {
        std::vector<TrajectorySample> s;
        for (auto si : test_subjects) {
          auto expanded = expand_trajectories(timelines[si], static_cast<int>(si));
          s.insert(s.end(), expanded.begin(), expanded.end());
        }
        return s;
      }();
      EmbeddingCache cache(searched.best_model, timelines);

      for (const auto& scenario : cfg.scenarios) {
        Rng scenario_rng = master.child(
            fnv1a("split:" + std::to_string(split) +
                  ":scenario:" + scenario.to_string()));
        outcome.by_scenario[scenario.to_string()] =
            evaluate_scenario(searched.best_model, cache, timelines,
                              test_samples, scenario, cfg.n_repeats,
                              scenario_rng);
      }
      outcome.ok = true;
      outcome.info = {
          {"split", split},
          {"n_train_subjects", train_subjects.size()},
          {"n_test_subjects", test_subjects.size()},
          {"best_grid_index", searched.best_index},
          {"best_val_loss", searched.best_state.best_validation_loss},
          {"best_config", searched.points[searched.best_index].config.to_json()}};
    } catch (const std::exception& e) {
      outcome.error = e.what();
      outcome.info = {{"split", split}, {"error", e.what()}};
    }
  }

  std::size_t n_ok = 0;
  for (const auto& o : outcomes) n_ok += o.ok ? 1 : 0;
  const std::size_t required = std::min(cfg.min_successful_splits, cfg.n_splits);
  if (n_ok < required) {
    std::string first_error;
    for (const auto& o : outcomes) {
      if (!o.ok) {
        first_error = o.error;
        break;
      }
    }
    throw NumericError("experiment: only " + std::to_string(n_ok) + " of " +
                       std::to_string(cfg.n_splits) +
                       " splits succeeded (need " + std::to_string(required) +
                       "); first failure: " + first_error);
  }

  MetricReport report;
  for (const auto& scenario : cfg.scenarios) {
    MetricReport::Row row;
    row.scenario = scenario;
    const std::string key = scenario.to_string();
    for (int year = 0; year < 5; ++year) {
      std::vector<double> split_means;
      std::size_t undefined = 0;
      for (const auto& o : outcomes) {
        if (!o.ok) continue;
        const auto& cell = o.by_scenario.at(key).year_auc[year];
        if (!cell.values.empty()) split_means.push_back(cell.mean);
        undefined += cell.n_undefined;
      }
      row.years[year] = CellStat::from_values(std::move(split_means), undefined);
    }
    std::vector<double> cvals;
    std::size_t cundef = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      const auto& cell = o.by_scenario.at(key).cindex;
      if (!cell.values.empty()) cvals.push_back(cell.mean);
      cundef += cell.n_undefined;
    }
    row.cindex = CellStat::from_values(std::move(cvals), cundef);
    report.rows.push_back(std::move(row));
  }

  nlohmann::json splits_json = nlohmann::json::array();
  for (const auto& o : outcomes) splits_json.push_back(o.info);
  report.provenance = {
      {"protocol", "repeated stratified splits + pseudo-test-set resampling"},
      {"aggregation_axis", "splits"},
      {"n_splits", cfg.n_splits},
      {"n_successful_splits", n_ok},
      {"n_repeats", cfg.n_repeats},
      {"master_seed", cfg.master_seed},
      {"train_ratio", cfg.train_ratio},
      {"grid_size", cfg.grid.size()},
      {"splits", splits_json},
      {"c_index_definition",
       "Harrell comparable-pair concordance on 5-year cumulative risk within "
       "each pseudo test set, averaged over repeats, then over splits"}};
  return report;
}

std::array<Image, 4> saliency(const RiskModel& model,
                              const std::vector<SubjectTimeline>& timelines,
                              const TrajectorySample& sample, int target_year) {
  if (target_year < 1 || target_year > 5) {
    throw ContractError("saliency: target year must be 1..5");
  }
  if (model.stub().mode() != ImageEncoderStub::Mode::random_projection) {
    throw UnsupportedModeError(
        "saliency needs pixel inputs; this model runs on precomputed embeddings");
  }
  const auto& timeline = timelines[static_cast<std::size_t>(sample.subject_index)];
  const auto& now_visit =
      timeline.visits[static_cast<std::size_t>(sample.now_visit_index())];
  if (now_visit.kind != PayloadKind::image) {
    throw UnsupportedModeError("saliency: cohort carries embeddings, not images");
  }

  // live graph for the now visit; history visits enter as constants
  std::array<Tensor, 4> inputs;
  for (int slot = 0; slot < 4; ++slot) {
    inputs[slot] = model.image_tensor(now_visit, slot);
    inputs[slot].set_requires_grad(true);
  }
  std::array<Tensor, 5> embeddings;
  HistoryMask mask;
  for (int slot = 0; slot < 5; ++slot) {
    const bool have = sample.history[slot] >= 0;
    mask.present[slot] = have;
    if (!have) continue;
    if (slot == 4) {
      embeddings[slot] = model.embed_visit(inputs);
    } else {
      ops::NoGradGuard guard;
      embeddings[slot] = model.embed_visit(
          timeline.visits[static_cast<std::size_t>(sample.history[slot])]);
    }
  }
  Rng unused(0);
  Tensor z = model.history_logits(embeddings, mask, /*train=*/false, unused);
  std::vector<double> pick(5, 0.0);
  pick[target_year - 1] = 1.0;
  Tensor target = ops::sum(ops::mul(z, Tensor::from_data({1, 5}, pick)));
  backward(target);

  const std::size_t h = model.config().image_height;
  const std::size_t w = model.config().image_width;
  std::array<Image, 4> maps;
  for (int slot = 0; slot < 4; ++slot) {
    Image map(h, w);
    auto grad = inputs[slot].grad();
    double peak = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) {
      // |d target / d pixel| accumulated over the replicated channels
      const double g = std::abs(grad[i]) + std::abs(grad[h * w + i]) +
                       std::abs(grad[2 * h * w + i]);
      map.px[i] = g;
      peak = std::max(peak, g);
    }
    if (peak > 0.0) {
      for (auto& v : map.px) v /= peak;
    }
    maps[slot] = std::move(map);
  }
  return maps;
}

}  // namespace longrisk
