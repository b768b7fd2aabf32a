#include "longrisk/model.hpp"

#include "longrisk/errors.hpp"
#include "longrisk/version.hpp"

namespace longrisk {

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{
      {"d_model", d_model},
      {"n_heads", n_heads},
      {"dropout", dropout},
      {"train_visit_encoder", train_visit_encoder},
      {"stub_mode", stub_mode == ImageEncoderStub::Mode::random_projection
                        ? "random_projection"
                        : "passthrough"},
      {"image_height", image_height},
      {"image_width", image_width},
      {"norm_mean", norm_mean},
      {"norm_std", norm_std},
      {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.dropout = j.value("dropout", c.dropout);
  c.train_visit_encoder = j.value("train_visit_encoder", c.train_visit_encoder);
  const std::string mode = j.value("stub_mode", "random_projection");
  c.stub_mode = mode == "passthrough" ? ImageEncoderStub::Mode::passthrough
                                      : ImageEncoderStub::Mode::random_projection;
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.norm_mean = j.value("norm_mean", c.norm_mean);
  c.norm_std = j.value("norm_std", c.norm_std);
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

RiskModel::RiskModel(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.d_model == 0 || cfg.d_model % 2 != 0) {
    throw ConfigError("model: d_model must be even and positive, got " +
                      std::to_string(cfg.d_model));
  }
  Rng init(cfg.init_seed);
  stub_ = ImageEncoderStub(cfg.stub_mode, cfg.d_model, cfg.input_len(),
                           init.child(0xE5C0DE).seed());
  Rng params = init.child(0x11175);
  visit_encoder_ = VisitEncoder(cfg.d_model, cfg.n_heads, params);
  time_aggregator_ = TimeAggregator(cfg.d_model, cfg.n_heads, cfg.dropout, params);
  head_ = HazardHead(cfg.d_model, params);
  visit_encoder_.set_trainable(cfg.train_visit_encoder);
}

Tensor RiskModel::image_tensor(const VisitRecord& visit, int slot) const {
  if (visit.kind != PayloadKind::image) {
    throw UnsupportedModeError("visit carries embeddings, not images");
  }
  return preprocess_image(visit.images[slot], cfg_.image_height,
                          cfg_.image_width, cfg_.norm_mean, cfg_.norm_std);
}

Tensor RiskModel::embed_visit(const std::array<Tensor, 4>& image_inputs) const {
  std::array<Tensor, 4> embeddings;
  for (int slot = 0; slot < 4; ++slot) {
    embeddings[slot] = stub_.encode(image_inputs[slot]);
  }
  return visit_encoder_.encode(embeddings);
}

Tensor RiskModel::embed_visit(const VisitRecord& visit) const {
  std::array<Tensor, 4> inputs;
  if (visit.kind == PayloadKind::image) {
    if (stub_.mode() != ImageEncoderStub::Mode::random_projection) {
      throw UnsupportedModeError(
          "model was built for precomputed embeddings but the cohort has images");
    }
    for (int slot = 0; slot < 4; ++slot) inputs[slot] = image_tensor(visit, slot);
  } else {
    if (stub_.mode() != ImageEncoderStub::Mode::passthrough) {
      throw UnsupportedModeError(
          "model was built for images but the cohort has precomputed embeddings");
    }
    for (int slot = 0; slot < 4; ++slot) {
      inputs[slot] = Tensor::from_data({visit.embeddings[slot].size()},
                                       visit.embeddings[slot]);
    }
  }
  return embed_visit(inputs);
}

Tensor RiskModel::history_logits(const std::array<Tensor, 5>& visit_embeddings,
                                 const HistoryMask& mask, bool train,
                                 Rng& rng) const {
  Tensor m = time_aggregator_.aggregate(visit_embeddings, mask, train, rng);
  return head_.logits(m);
}

RiskCurve RiskModel::risk(const std::array<Tensor, 5>& visit_embeddings,
                          const HistoryMask& mask) const {
  Rng unused(0);
  Tensor z = history_logits(visit_embeddings, mask, /*train=*/false, unused);
  return HazardHead::curve_from_logits(z);
}

NamedParams RiskModel::named_params() const {
  NamedParams out;
  stub_.collect_params("visit_encoder.stub.", out);
  visit_encoder_.collect_params("visit_encoder.", out);
  time_aggregator_.collect_params("time_aggregator.", out);
  head_.collect_params("survival_head.", out);
  return out;
}

std::vector<Tensor> RiskModel::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_params()) {
    if (tensor.requires_grad()) out.push_back(tensor);
  }
  return out;
}

void RiskModel::save(const std::string& path,
                     const nlohmann::json& extra_meta) const {
  nlohmann::json meta = extra_meta.is_object() ? extra_meta
                                               : nlohmann::json::object();
  meta["kind"] = "risk_model";
  meta["tool_version"] = std::string(kVersion);
  meta["model"] = cfg_.to_json();
  save_checkpoint(path, named_params(), meta);
}

RiskModel RiskModel::from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("model")) {
    throw ValidationError("checkpoint has no model configuration block");
  }
  RiskModel model(ModelConfig::from_json(ckpt.meta["model"]));
  for (auto& [name, tensor] : model.named_params()) {
    const auto* entry = ckpt.find(name);
    if (!entry) {
      throw ValidationError("checkpoint is missing parameter '" + name + "'");
    }
    if (entry->shape != tensor.shape()) {
      throw ValidationError("checkpoint parameter '" + name + "' has shape " +
                            shape_str(entry->shape) + ", model expects " +
                            shape_str(tensor.shape()));
    }
    auto dst = tensor.mutable_data();
    std::copy(entry->data.begin(), entry->data.end(), dst.begin());
  }
  return model;
}

RiskModel RiskModel::load(const std::string& path) {
  return from_checkpoint(load_checkpoint(path));
}

void RiskModel::copy_params_from(const RiskModel& other) {
  auto mine = named_params();
  auto theirs = other.named_params();
  if (mine.size() != theirs.size()) {
    throw ContractError("copy_params_from: parameter lists differ");
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first ||
        mine[i].second.shape() != theirs[i].second.shape()) {
      throw ContractError("copy_params_from: mismatch at '" + mine[i].first + "'");
    }
    auto dst = mine[i].second.mutable_data();
    auto src = theirs[i].second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void RiskModel::check_compatible(
    const std::vector<SubjectTimeline>& timelines) const {
  for (const auto& tl : timelines) {
    if (tl.visits.empty()) continue;
    const auto& v = tl.visits.front();
    if (v.kind == PayloadKind::image) {
      if (stub_.mode() != ImageEncoderStub::Mode::random_projection) {
        throw ValidationError(
            "model expects precomputed embeddings but cohort '" +
            tl.subject_id + "' carries images");
      }
    } else {
      if (stub_.mode() != ImageEncoderStub::Mode::passthrough) {
        throw ValidationError("model expects images but cohort '" +
                              tl.subject_id + "' carries embeddings");
      }
      if (v.embeddings[0].size() != cfg_.d_model) {
        throw ValidationError(
            "cohort embeddings have width " +
            std::to_string(v.embeddings[0].size()) + ", model expects " +
            std::to_string(cfg_.d_model));
      }
    }
    return;  // payload kind is uniform across a valid cohort
  }
}

}  // namespace longrisk
