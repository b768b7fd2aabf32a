#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"
#include "longrisk/metrics.hpp"
#include "longrisk/model.hpp"
#include "longrisk/trainer.hpp"

namespace longrisk {

/// History availability scenario: how many years back the model may look and
/// at what screening frequency. Text form is `<duration>` optionally followed
/// by `*` (annual) or `+` (biennial), e.g. "0", "3*", "4+". Biennial requires
/// an even duration.
struct ScenarioMask {
  enum class Frequency { annual, biennial };

  int duration = 0;  // 0..4 years of history
  Frequency frequency = Frequency::annual;

  static ScenarioMask parse(const std::string& text);
  std::string to_string() const;

  /// Offsets this scenario exposes: annual D -> {-D..0}; biennial D ->
  /// {-D, -D+2, ..., 0}. Offset 0 is always visible.
  HistoryMask visible() const;

  bool operator==(const ScenarioMask&) const = default;
};

std::vector<ScenarioMask> parse_scenarios(const std::string& comma_list);

/// One pseudo test set: for each subject owning at least one sample with a
/// known label at the target year, one uniformly chosen such sample.
/// Returns indices into `samples`. Subjects with no eligible sample are
/// omitted; an empty result throws MetricError.
std::vector<std::size_t> build_pseudo_test_set(
    const std::vector<TrajectorySample>& samples, int target_year, Rng& rng);

/// Pseudo test set for concordance: eligible samples either carry an event
/// within the 5-year horizon or at least one known follow-up year.
std::vector<std::size_t> build_concordance_test_set(
    const std::vector<TrajectorySample>& samples, Rng& rng);

SurvivalObservation observation_for(const TrajectorySample& sample,
                                    const SubjectTimeline& timeline,
                                    double five_year_risk);

/// Risk curves for every sample under one scenario (visible AND actually
/// present history). Read-only over the model; computed in parallel.
std::vector<RiskCurve> score_samples(const RiskModel& model,
                                     const EmbeddingCache& cache,
                                     const std::vector<TrajectorySample>& samples,
                                     const ScenarioMask& scenario);

struct CellStat {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::vector<double> values;        // one per aggregation unit
  std::size_t n_undefined = 0;       // excluded repeats
  bool degenerate_ci = false;        // fewer than 2 values

  static CellStat from_values(std::vector<double> values,
                              std::size_t n_undefined = 0);
};

struct ScenarioResult {
  ScenarioMask scenario;
  std::array<CellStat, 5> year_auc;  // follow-up years 1..5, over repeats
  CellStat cindex;
};

/// The resampled-evaluation protocol for one trained model and one scenario:
/// per follow-up year, n_repeats random pseudo test sets are scored with the
/// year-k cumulative risk and the ROCAUC values averaged; repeats where the
/// metric is undefined are excluded and counted, and more than 50% undefined
/// repeats in a cell is a hard error. The C-index runs analogously on the
/// 5-year risk.
ScenarioResult evaluate_scenario(const RiskModel& model,
                                 const EmbeddingCache& cache,
                                 const std::vector<SubjectTimeline>& timelines,
                                 const std::vector<TrajectorySample>& samples,
                                 const ScenarioMask& scenario,
                                 std::size_t n_repeats, Rng& rng);

struct MetricReport {
  struct Row {
    ScenarioMask scenario;
    std::array<CellStat, 5> years;
    CellStat cindex;
  };
  std::vector<Row> rows;
  nlohmann::json provenance;

  std::string render_table() const;
  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

/// Evaluates an already-trained model on a cohort (no splits; confidence
/// intervals aggregate over pseudo-test repeats).
MetricReport evaluate_checkpoint(const RiskModel& model,
                                 const std::vector<SubjectTimeline>& timelines,
                                 const std::vector<ScenarioMask>& scenarios,
                                 std::size_t n_repeats, std::uint64_t seed);

struct ExperimentConfig {
  std::size_t n_splits = 10;
  std::size_t n_repeats = 100;
  double train_ratio = 0.8;
  std::vector<ScenarioMask> scenarios;
  std::vector<TrainConfig> grid;  // at least one point
  std::uint64_t master_seed = 1;
  std::size_t min_successful_splits = 8;
};

/// Full protocol: n_splits stratified 80/20 subject splits; per split a
/// 75/25 validation split, grid search, and scenario evaluation on the test
/// side; cells aggregate the per-split means with normal-approximation 95%
/// confidence intervals. Per-split failures are recorded in the provenance;
/// fewer than min(min_successful_splits, n_splits) successes is an error.
MetricReport run_experiment(const std::vector<SubjectTimeline>& timelines,
                            const ModelConfig& base_model,
                            const ExperimentConfig& cfg);

/// Pixel-gradient saliency for the four now-visit images of a sample:
/// |d logit_k / d pixel| summed over the three replicated channels and
/// normalized to [0, 1] per image. Image-mode cohorts only.
std::array<Image, 4> saliency(const RiskModel& model,
                              const std::vector<SubjectTimeline>& timelines,
                              const TrajectorySample& sample, int target_year);

}  // namespace longrisk
