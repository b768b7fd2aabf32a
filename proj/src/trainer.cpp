#include "longrisk/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "longrisk/adam.hpp"
#include "longrisk/autodiff.hpp"
#include "longrisk/errors.hpp"
#include "longrisk/kernels.hpp"

namespace longrisk {

namespace {

template <typename T, std::size_t N>
bool in_set(const std::array<T, N>& set, T v) {
  for (const auto& s : set) {
    if (s == v) return true;
  }
  return false;
}

bool close_to_any(const std::array<double, 3>& set, double v) {
  for (double s : set) {
    if (std::abs(s - v) <= 1e-12 * std::max(1.0, std::abs(s))) return true;
  }
  return false;
}

}  // namespace

void TrainConfig::validate() const {
  if (lr < 0.0) throw ConfigError("train: learning rate must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("train: dropout must be in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
  if (history_drop_prob < 0.0 || history_drop_prob >= 1.0) {
    throw ConfigError("train: history_drop_prob must be in [0, 1)");
  }
  if (grid_mode) {
    if (!in_set(kGridWidths, d_model)) {
      throw ConfigError("grid mode: d_model must be one of {128, 256, 512}, got " +
                        std::to_string(d_model));
    }
    if (!in_set(kGridHeads, n_heads)) {
      throw ConfigError("grid mode: n_heads must be one of {1, 4, 8}, got " +
                        std::to_string(n_heads));
    }
    if (!close_to_any(kGridL2, l2)) {
      throw ConfigError("grid mode: l2 must be one of {1e-4, 1e-5, 1e-6}");
    }
  }
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("train: d_model must be even and positive");
  }
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("train: d_model must be divisible by n_heads");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"lr", lr},
                        {"dropout", dropout},
                        {"d_model", d_model},
                        {"n_heads", n_heads},
                        {"l2", l2},
                        {"batch_size", batch_size},
                        {"max_epochs", max_epochs},
                        {"patience", patience},
                        {"seed", seed},
                        {"train_visit_encoder", train_visit_encoder},
                        {"history_augmentation", history_augmentation},
                        {"history_drop_prob", history_drop_prob},
                        {"grid_mode", grid_mode}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.dropout = j.value("dropout", c.dropout);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.l2 = j.value("l2", c.l2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.train_visit_encoder = j.value("train_visit_encoder", c.train_visit_encoder);
  c.history_augmentation = j.value("history_augmentation", c.history_augmentation);
  c.history_drop_prob = j.value("history_drop_prob", c.history_drop_prob);
  c.grid_mode = j.value("grid_mode", c.grid_mode);
  return c;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
make_validation_split(const std::vector<SubjectTimeline>& timelines,
                      const std::vector<std::size_t>& train_subjects,
                      Rng& rng) {
  if (train_subjects.size() < 4) {
    throw SplitError("validation split needs at least 4 training subjects, got " +
                     std::to_string(train_subjects.size()));
  }
  return split_subjects(timelines, train_subjects, 0.75, /*stratify=*/true, rng);
}

EmbeddingCache::EmbeddingCache(const RiskModel& model,
                               const std::vector<SubjectTimeline>& timelines)
    : model_(&model), timelines_(&timelines), frozen_(model.visit_encoder_frozen()) {
  if (!frozen_) return;
  cached_.resize(timelines.size());
  // flatten (subject, visit) pairs for a balanced parallel sweep
  std::vector<std::pair<std::size_t, std::size_t>> work;
  for (std::size_t s = 0; s < timelines.size(); ++s) {
    cached_[s].resize(timelines[s].visits.size());
    for (std::size_t v = 0; v < timelines[s].visits.size(); ++v) {
      work.emplace_back(s, v);
    }
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(work.size()); ++i) {
    const auto [s, v] = work[static_cast<std::size_t>(i)];
    ops::NoGradGuard guard;
    cached_[s][v] = model.embed_visit(timelines[s].visits[v]);
  }
}

Tensor EmbeddingCache::get(std::size_t subject_index,
                           std::size_t visit_index) const {
  if (frozen_) return cached_[subject_index][visit_index];
  return model_->embed_visit((*timelines_)[subject_index].visits[visit_index]);
}

HistoryInput gather_history(const EmbeddingCache& cache,
                            const TrajectorySample& sample,
                            const HistoryMask& visible) {
  HistoryInput input;
  for (int slot = 0; slot < 5; ++slot) {
    const bool have = sample.history[slot] >= 0;
    const bool keep = have && visible.present[slot];
    input.mask.present[slot] = keep;
    if (keep) {
      input.embeddings[slot] =
          cache.get(static_cast<std::size_t>(sample.subject_index),
                    static_cast<std::size_t>(sample.history[slot]));
    }
  }
  return input;
}

namespace {

std::vector<TrajectorySample> expand_subjects(
    const std::vector<SubjectTimeline>& timelines,
    const std::vector<std::size_t>& subjects) {
  std::vector<TrajectorySample> samples;
  for (auto si : subjects) {
    auto s = expand_trajectories(timelines[si], static_cast<int>(si));
    samples.insert(samples.end(), s.begin(), s.end());
  }
  return samples;
}

double validation_loss(const RiskModel& model, const EmbeddingCache& cache,
                       const std::vector<TrajectorySample>& samples,
                       const LossWeights& weights) {
  ops::NoGradGuard guard;
  Rng unused(0);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& sample : samples) {
    auto input = gather_history(cache, sample, HistoryMask::all());
    Tensor z = model.history_logits(input.embeddings, input.mask,
                                    /*train=*/false, unused);
    auto loss = survival_loss(z, sample.labels, sample.known, weights);
    if (!loss) continue;
    total += loss->value();
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::infinity()
                : total / static_cast<double>(n);
}

std::string parameter_norms(const RiskModel& model) {
  std::ostringstream os;
  for (const auto& [name, tensor] : model.named_params()) {
    double norm = 0.0;
    for (double v : tensor.data()) norm += v * v;
    os << " " << name << "=" << std::sqrt(norm);
  }
  return os.str();
}

std::vector<std::vector<double>> snapshot_params(const RiskModel& model) {
  std::vector<std::vector<double>> snap;
  for (const auto& [name, tensor] : model.named_params()) {
    auto d = tensor.data();
    snap.emplace_back(d.begin(), d.end());
  }
  return snap;
}

void restore_params(RiskModel& model, const std::vector<std::vector<double>>& snap) {
  auto params = model.named_params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ModelConfig& base_model,
                  const std::vector<SubjectTimeline>& timelines,
                  const std::vector<std::size_t>& fit_subjects,
                  const std::vector<std::size_t>& val_subjects,
                  const RiskModel* warm_start) {
  cfg.validate();

  ModelConfig mcfg = base_model;
  mcfg.d_model = cfg.d_model;
  mcfg.n_heads = cfg.n_heads;
  mcfg.dropout = cfg.dropout;
  mcfg.train_visit_encoder = cfg.train_visit_encoder;
  Rng master(cfg.seed);
  mcfg.init_seed = master.child(0x1217).seed();

  RiskModel model(mcfg);
  model.check_compatible(timelines);
  if (warm_start) model.copy_params_from(*warm_start);

  auto fit_samples = expand_subjects(timelines, fit_subjects);
  auto val_samples = expand_subjects(timelines, val_subjects);
  if (fit_samples.empty()) throw SplitError("no fit samples to train on");

  // weights come from the fit split only
  const LossWeights weights = compute_loss_weights(fit_samples);

  EmbeddingCache cache(model, timelines);
  Adam adam(model.trainable_params(),
            AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.l2});

  TrainResult result;
  result.weights = weights;
  auto best_snapshot = snapshot_params(model);

  std::vector<std::size_t> order(fit_samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = master.child(0x500000 + epoch);
    Rng dropout_rng = master.child(0xD00000 + epoch);
    Rng augment_rng = master.child(0xA00000 + epoch);
    shuffle_rng.shuffle(order);

    double train_loss_sum = 0.0;
    std::size_t train_loss_count = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      Tensor batch_loss;
      std::size_t batch_n = 0;
      for (std::size_t oi = start; oi < stop; ++oi) {
        const auto& sample = fit_samples[order[oi]];
        HistoryMask visible = HistoryMask::all();
        if (cfg.history_augmentation) {
          for (int slot = 0; slot < 4; ++slot) {
            // draw per past slot regardless of presence to keep the stream
            // aligned across samples with different histories
            const bool drop = augment_rng.uniform() < cfg.history_drop_prob;
            if (drop) visible.present[slot] = false;
          }
        }
        auto input = gather_history(cache, sample, visible);
        Tensor z = model.history_logits(input.embeddings, input.mask,
                                        /*train=*/true, dropout_rng);
        auto loss = survival_loss(z, sample.labels, sample.known, weights);
        if (!loss) {
          ++result.state.skipped_samples;
          continue;
        }
        batch_loss = batch_loss.defined() ? ops::add(batch_loss, *loss) : *loss;
        ++batch_n;
      }
      if (batch_n == 0) continue;
      batch_loss = ops::scale(batch_loss, 1.0 / static_cast<double>(batch_n));
      const double loss_value = batch_loss.value();
      if (!std::isfinite(loss_value)) {
        throw NumericError(
            "non-finite training loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(start / cfg.batch_size) +
            "; parameter norms:" + parameter_norms(model));
      }
      train_loss_sum += loss_value * static_cast<double>(batch_n);
      train_loss_count += batch_n;
      if (cfg.lr > 0.0 || cfg.l2 > 0.0) {
        backward(batch_loss);
        adam.step();
        adam.zero_grad();
      }
      // with lr == 0 and no decay the step is skipped entirely; parameters
      // stay bit-identical
    }

    const double train_loss =
        train_loss_count ? train_loss_sum / static_cast<double>(train_loss_count)
                         : std::numeric_limits<double>::infinity();
    const double val_loss = validation_loss(model, cache, val_samples, weights);
    result.state.epoch_losses.emplace_back(train_loss, val_loss);
    result.state.epochs_run = epoch;

    std::size_t since_improvement;
    if (val_loss < result.state.best_validation_loss) {
      result.state.best_validation_loss = val_loss;
      result.state.best_epoch = epoch;
      best_snapshot = snapshot_params(model);
      since_improvement = 0;
    } else {
      since_improvement = epoch - result.state.best_epoch;
    }
    if (since_improvement >= cfg.patience) break;
  }

  restore_params(model, best_snapshot);
  result.model = std::move(model);
  return result;
}

std::vector<TrainConfig> full_grid(const TrainConfig& base) {
  std::vector<TrainConfig> grid;
  grid.reserve(27);
  for (auto d : kGridWidths) {
    for (auto h : kGridHeads) {
      for (auto l2 : kGridL2) {
        TrainConfig cfg = base;
        cfg.d_model = d;
        cfg.n_heads = h;
        cfg.l2 = l2;
        cfg.grid_mode = true;
        grid.push_back(cfg);
      }
    }
  }
  return grid;
}

GridSearchResult grid_search(const std::vector<TrainConfig>& grid,
                             const ModelConfig& base_model,
                             const std::vector<SubjectTimeline>& timelines,
                             const std::vector<std::size_t>& fit_subjects,
                             const std::vector<std::size_t>& val_subjects) {
  if (grid.empty()) throw ConfigError("grid search: empty grid");
  GridSearchResult result;
  result.points.resize(grid.size());

  struct Best {
    double loss = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
    bool have = false;
    RiskModel model;
    TrainState state;
    LossWeights weights;
  };
  std::vector<Best> local_best(1);
#ifdef _OPENMP
  local_best.resize(kernels::max_threads());
#endif

  const std::uint64_t grid_seed = grid.front().seed;

#pragma omp parallel for schedule(dynamic)
  for (long long ip = 0; ip < static_cast<long long>(grid.size()); ++ip) {
    const auto i = static_cast<std::size_t>(ip);
    TrainConfig cfg = grid[i];
    cfg.seed = Rng(grid_seed).child(0x62D0 + i).seed();
    GridPointResult& point = result.points[i];
    point.config = cfg;
    try {
      TrainResult trained = train(cfg, base_model, timelines, fit_subjects,
                                  val_subjects);
      point.best_val_loss = trained.state.best_validation_loss;
      point.epochs_run = trained.state.epochs_run;
      Best& best = local_best[
#ifdef _OPENMP
          static_cast<std::size_t>(omp_get_thread_num())
#else
          0
#endif
      ];
      const bool better =
          !best.have || point.best_val_loss < best.loss ||
          (point.best_val_loss == best.loss && i < best.index);
      if (better) {
        best.loss = point.best_val_loss;
        best.index = i;
        best.have = true;
        best.model = std::move(trained.model);
        best.state = std::move(trained.state);
        best.weights = trained.weights;
      }
    } catch (const std::exception& e) {
      point.error = e.what();
    }
  }

  const Best* winner = nullptr;
  for (const auto& b : local_best) {
    if (!b.have) continue;
    if (!winner || b.loss < winner->loss ||
        (b.loss == winner->loss && b.index < winner->index)) {
      winner = &b;
    }
  }
  if (!winner) {
    std::string detail;
    for (const auto& p : result.points) {
      if (!p.error.empty()) {
        detail = p.error;
        break;
      }
    }
    throw NumericError("grid search: every grid point failed (" + detail + ")");
  }
  result.best_index = winner->index;
  result.best_model = winner->model;
  result.best_state = winner->state;
  result.weights = winner->weights;
  return result;
}

std::string grid_results_csv(const GridSearchResult& result) {
  std::ostringstream os;
  os << "index,d_model,n_heads,l2,lr,dropout,best_val_loss,epochs_run,status\n";
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    os << i << "," << p.config.d_model << "," << p.config.n_heads << ","
       << p.config.l2 << "," << p.config.lr << "," << p.config.dropout << ",";
    if (p.ok()) {
      os << p.best_val_loss << "," << p.epochs_run << ",ok";
    } else {
      os << "nan," << p.epochs_run << ",failed: " << p.error;
    }
    if (i == result.best_index && p.ok()) os << " (selected)";
    os << "\n";
  }
  return os.str();
}

}  // namespace longrisk
