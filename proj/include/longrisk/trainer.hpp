#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "longrisk/model.hpp"

namespace longrisk {

// Published tuning grid.
inline constexpr std::array<std::size_t, 3> kGridWidths = {128, 256, 512};
inline constexpr std::array<std::size_t, 3> kGridHeads = {1, 4, 8};
inline constexpr std::array<double, 3> kGridL2 = {1e-4, 1e-5, 1e-6};

struct TrainConfig {
  double lr = 1e-3;
  double dropout = 0.25;
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  double l2 = 1e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  bool train_visit_encoder = false;
  // Randomly drop past visits (offset 0 always kept) during training so a
  // single model serves every history-availability scenario at evaluation.
  bool history_augmentation = true;
  double history_drop_prob = 0.3;
  // When on, d_model / n_heads / l2 must come from the published grid sets.
  bool grid_mode = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainState {
  std::size_t epochs_run = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t skipped_samples = 0;  // fully censored, contributed nothing
  std::vector<std::pair<double, double>> epoch_losses;  // (train, validation)
};

struct TrainResult {
  RiskModel model;  // parameters of the best validation epoch
  TrainState state;
  LossWeights weights;
};

/// Subject-level 75/25 fit/validation split, diagnosis-stratified.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
make_validation_split(const std::vector<SubjectTimeline>& timelines,
                      const std::vector<std::size_t>& train_subjects, Rng& rng);

/// Per-visit embeddings for a cohort. With the visit encoder frozen the
/// embeddings are fixed values, precomputed once (in parallel) and shared;
/// otherwise every lookup runs the live encoder so gradients reach it.
class EmbeddingCache {
 public:
  EmbeddingCache(const RiskModel& model,
                 const std::vector<SubjectTimeline>& timelines);

  Tensor get(std::size_t subject_index, std::size_t visit_index) const;
  bool frozen() const { return frozen_; }

 private:
  const RiskModel* model_;
  const std::vector<SubjectTimeline>* timelines_;
  bool frozen_;
  std::vector<std::vector<Tensor>> cached_;
};

/// Gathers the embeddings for a sample's history under a mask. Slots the
/// mask marks visible but the sample does not actually have stay absent.
struct HistoryInput {
  std::array<Tensor, 5> embeddings;
  HistoryMask mask;
};
HistoryInput gather_history(const EmbeddingCache& cache,
                            const TrajectorySample& sample,
                            const HistoryMask& visible);

/// Trains temporal aggregator and survival head (and optionally the visit
/// encoder) on the expanded fit samples with early stopping on validation
/// loss. Loss weights come from the fit samples only. warm_start, when
/// given, seeds the parameters from an architecture-identical model.
TrainResult train(const TrainConfig& cfg, const ModelConfig& base_model,
                  const std::vector<SubjectTimeline>& timelines,
                  const std::vector<std::size_t>& fit_subjects,
                  const std::vector<std::size_t>& val_subjects,
                  const RiskModel* warm_start = nullptr);

struct GridPointResult {
  TrainConfig config;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs_run = 0;
  std::string error;  // empty on success
  bool ok() const { return error.empty(); }
};

struct GridSearchResult {
  std::vector<GridPointResult> points;  // grid order
  std::size_t best_index = 0;
  RiskModel best_model;
  TrainState best_state;
  LossWeights weights;
};

std::vector<TrainConfig> full_grid(const TrainConfig& base);

/// Trains every grid point (independent seed streams, parallel across
/// points) and ranks by best validation loss; ties break toward the earlier
/// grid point. Per-point failures are recorded, not fatal, unless every
/// point fails.
GridSearchResult grid_search(const std::vector<TrainConfig>& grid,
                             const ModelConfig& base_model,
                             const std::vector<SubjectTimeline>& timelines,
                             const std::vector<std::size_t>& fit_subjects,
                             const std::vector<std::size_t>& val_subjects);

std::string grid_results_csv(const GridSearchResult& result);

}  // namespace longrisk
