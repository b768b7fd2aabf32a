#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "longrisk/checkpoint.hpp"
#include "longrisk/cohort.hpp"
#include "longrisk/survival.hpp"
#include "longrisk/temporal.hpp"
#include "longrisk/visit_encoder.hpp"

namespace longrisk {

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  double dropout = 0.25;
  // The image encoder stub is always frozen; the visit-level aggregator is
  // frozen by default and can be unfrozen for cohorts without pretrained
  // features.
  bool train_visit_encoder = false;
  ImageEncoderStub::Mode stub_mode = ImageEncoderStub::Mode::random_projection;
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  double norm_mean = 0.0;
  double norm_std = 1.0;
  std::uint64_t init_seed = 1;

  std::size_t input_len() const { return 3 * image_height * image_width; }
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Full risk model: frozen per-image encoder stub, visit-level fusion,
/// temporal aggregation over up to five visits, additive hazard head.
class RiskModel {
 public:
  RiskModel() = default;
  explicit RiskModel(const ModelConfig& cfg);

  /// Preprocessed [3 x h x w] tensor for one image slot of a visit.
  Tensor image_tensor(const VisitRecord& visit, int slot) const;

  /// Embedding of one visit. Builds a gradient tape only if some input or
  /// parameter on the path requires one.
  Tensor embed_visit(const VisitRecord& visit) const;
  Tensor embed_visit(const std::array<Tensor, 4>& image_inputs) const;

  /// Cumulative pre-sigmoid logits [1 x 5] from per-visit embeddings.
  Tensor history_logits(const std::array<Tensor, 5>& visit_embeddings,
                        const HistoryMask& mask, bool train, Rng& rng) const;

  RiskCurve risk(const std::array<Tensor, 5>& visit_embeddings,
                 const HistoryMask& mask) const;

  NamedParams named_params() const;          // includes frozen parameters
  std::vector<Tensor> trainable_params() const;

  void save(const std::string& path, const nlohmann::json& extra_meta) const;
  static RiskModel load(const std::string& path);
  static RiskModel from_checkpoint(const Checkpoint& ckpt);

  /// Copy parameter values from another model with identical architecture.
  void copy_params_from(const RiskModel& other);

  const ModelConfig& config() const { return cfg_; }
  const ImageEncoderStub& stub() const { return stub_; }
  const VisitEncoder& visit_encoder() const { return visit_encoder_; }
  const TimeAggregator& time_aggregator() const { return time_aggregator_; }
  TimeAggregator& time_aggregator() { return time_aggregator_; }
  const HazardHead& head() const { return head_; }

  bool visit_encoder_frozen() const { return !cfg_.train_visit_encoder; }

  /// Throws when the cohort payload kind or width cannot feed this model.
  void check_compatible(const std::vector<SubjectTimeline>& timelines) const;

 private:
  ModelConfig cfg_;
  ImageEncoderStub stub_;
  VisitEncoder visit_encoder_;
  TimeAggregator time_aggregator_;
  HazardHead head_;
};

}  // namespace longrisk
