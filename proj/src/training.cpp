// Copyright 2026 The wdwada Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wdwada/training.hpp"

#include <algorithm>
#include <cmath>

#include "wdwada/errors.hpp"
#include "wdwada/metrics.hpp"

namespace wdwada {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NumericalError(std::string(what) + " became non-finite");
}

void require_finite(const std::vector<Tensor>& grads, const char* what) {
  for (const auto& g : grads) {
    if (!g.all_finite()) throw NumericalError(std::string(what) + " gradient became non-finite");
  }
}

void require_both_classes(const Tensor& labels, const char* what) {
  bool pos = false, neg = false;
  for (double y : labels.data()) {
    pos = pos || y == 1.0;
    neg = neg || y == 0.0;
  }
  if (!pos || !neg) throw DataError(std::string(what) + " must contain both classes");
}

// Rows [0, k) of a matrix.
Tensor head_rows(const Tensor& m, std::size_t k) {
  if (k == m.dim(0)) return m;
  const auto cols = m.dim(1);
  return Tensor({k, cols}, std::vector<double>(m.data().begin(), m.data().begin() + std::ptrdiff_t(k * cols)));
}

Tensor zeros_like_labels(std::size_t n, double value) { return Tensor::full({n}, value); }

// Domain-classifier BCE with source labeled 0 and target labeled 1.
Var domain_bce(const ModelConfig& cfg, const BoundParams& critic, Var zs, Var zt) {
  const auto ns = zs.value().dim(0), nt = zt.value().dim(0);
  Var ls = cross_entropy(sigmoid(criticize(cfg, critic, zs)), zeros_like_labels(ns, 0.0));
  Var lt = cross_entropy(sigmoid(criticize(cfg, critic, zt)), zeros_like_labels(nt, 1.0));
  return scale(add(ls, lt), 0.5);
}

std::vector<Var> concat(std::span<const Var> a, std::span<const Var> b) {
  std::vector<Var> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void apply_generator_grads(ModelBundle& model, const std::vector<Var>& grads, const TrainConfig& config) {
  const std::size_t ne = model.extractor.size();
  std::vector<Tensor> ge, gc;
  ge.reserve(ne);
  gc.reserve(grads.size() - ne);
  for (std::size_t i = 0; i < grads.size(); ++i) (i < ne ? ge : gc).push_back(grads[i].value());
  require_finite(ge, "extractor");
  require_finite(gc, "classifier");
  optimizer_step(model.extractor, ge, config.optimizer, config.lr_generator);
  optimizer_step(model.classifier, gc, config.optimizer, config.lr_generator);
}

struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  std::optional<double> mean() const {
    return count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
  }
};

// Loss actually optimized by the classifier in adversarial epochs.
LossConfig resolve_loss(const TrainConfig& config, const LabeledPartition& source) {
  LossConfig loss = config.effective_loss();
  if (!loss.alpha_pos) loss.alpha_pos = class_balance_weight(source.labels.data());
  return loss;
}

// Classification-only epochs (pretraining and the CNN baselines).
TrainLog supervised_epochs(ModelBundle& model, const LabeledPartition& data, const TrainConfig& config,
                           const LossConfig& loss, const char* phase, const LabeledPartition* eval,
                           const EpochCallback& on_epoch) {
  TrainLog log;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto start = Clock::now();
    const std::size_t epoch = config.epoch_offset + e;
    Accumulator cls;
    for (const auto& rows : batch_iter(data.size(), config.batch_size, config.seed, epoch)) {
      Tensor x = gather_rows(data.features, rows);
      Tensor y({rows.size()});
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = data.labels[rows[i]];
      cls.add(generator_step(model, x, y, Tensor(), config, loss));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.classification_loss = cls.mean().value_or(0.0);
    if (eval) rec.eval = evaluate_snapshot(model, *eval, config.threshold);
    rec.wall_seconds = seconds_since(start);
    if (on_epoch) on_epoch(rec);
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

LossConfig cross_entropy_loss() {
  LossConfig l;
  l.gamma = 0.0;
  l.alpha_pos = 1.0;
  l.lambda_domain = 0.0;
  return l;
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kTargetOnlyCnn: return "target_only_cnn";
    case TrainMode::kSourceOnlyCnn: return "source_only_cnn";
    case TrainMode::kDann: return "dann";
    case TrainMode::kWdAda: return "wd_ada";
    case TrainMode::kWdWada: return "wd_wada";
  }
  return "?";
}

TrainMode train_mode_from_string(std::string_view text) {
  for (auto m : {TrainMode::kTargetOnlyCnn, TrainMode::kSourceOnlyCnn, TrainMode::kDann, TrainMode::kWdAda,
                 TrainMode::kWdWada}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected target_only_cnn, source_only_cnn, dann, wd_ada or wd_wada)");
}

bool is_adversarial(TrainMode mode) {
  return mode == TrainMode::kDann || mode == TrainMode::kWdAda || mode == TrainMode::kWdWada;
}

void TrainConfig::validate() const {
  if (n_critic < 1) throw ConfigError("n_critic must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lr_generator >= 0.0) || !(lr_critic >= 0.0) || !std::isfinite(lr_generator) || !std::isfinite(lr_critic)) {
    throw ConfigError("learning rates must be finite and non-negative");
  }
  if (!(pretrain_fraction >= 0.0 && pretrain_fraction <= 1.0)) throw ConfigError("pretrain_fraction must lie in [0, 1]");
  loss.validate();
  optimizer.validate();
}

LossConfig TrainConfig::effective_loss() const {
  LossConfig l = loss;
  if (mode != TrainMode::kWdWada) {
    l.gamma = 0.0;
    l.alpha_pos = 1.0;
  }
  return l;
}

std::size_t TrainConfig::pretrain_epochs() const {
  if (!is_adversarial(mode)) return epochs;
  return static_cast<std::size_t>(std::floor(static_cast<double>(epochs) * pretrain_fraction));
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json loss = {{"rho", c.loss.rho}, {"gamma", c.loss.gamma}, {"lambda_domain", c.loss.lambda_domain}};
  loss["alpha_pos"] = c.loss.alpha_pos ? nlohmann::json(*c.loss.alpha_pos) : nlohmann::json("auto");
  return {
      {"mode", to_string(c.mode)},
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"n_critic", c.n_critic},
      {"lr_generator", c.lr_generator},
      {"lr_critic", c.lr_critic},
      {"loss", loss},
      {"optimizer",
       {{"kind", to_string(c.optimizer.kind)},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"momentum", c.optimizer.momentum}}},
      {"pretrain_fraction", c.pretrain_fraction},
      {"critic_warmup_steps", c.critic_warmup_steps},
      {"epoch_offset", c.epoch_offset},
      {"threshold", c.threshold},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.n_critic = j.value("n_critic", c.n_critic);
    c.lr_generator = j.value("lr_generator", c.lr_generator);
    c.lr_critic = j.value("lr_critic", c.lr_critic);
    c.pretrain_fraction = j.value("pretrain_fraction", c.pretrain_fraction);
    c.critic_warmup_steps = j.value("critic_warmup_steps", c.critic_warmup_steps);
    c.epoch_offset = j.value("epoch_offset", c.epoch_offset);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      c.loss.rho = l.value("rho", c.loss.rho);
      c.loss.gamma = l.value("gamma", c.loss.gamma);
      c.loss.lambda_domain = l.value("lambda_domain", c.loss.lambda_domain);
      if (l.contains("alpha_pos")) {
        const auto& a = l.at("alpha_pos");
        if (a.is_string()) {
          if (a.get<std::string>() != "auto") throw ConfigError("alpha_pos must be a number or \"auto\"");
          c.loss.alpha_pos.reset();
        } else {
          c.loss.alpha_pos = a.get<double>();
        }
      }
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      if (o.contains("kind")) c.optimizer.kind = optimizer_kind_from_string(o.at("kind").get<std::string>());
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
      c.optimizer.momentum = o.value("momentum", c.optimizer.momentum);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"phase", r.phase}, {"classification_loss", r.classification_loss}};
  j["wasserstein"] = r.wasserstein ? nlohmann::json(*r.wasserstein) : nlohmann::json(nullptr);
  j["gradient_penalty"] = r.gradient_penalty ? nlohmann::json(*r.gradient_penalty) : nlohmann::json(nullptr);
  j["domain_loss"] = r.domain_loss ? nlohmann::json(*r.domain_loss) : nlohmann::json(nullptr);
  if (r.eval) {
    j["eval"] = {{"auc", r.eval->auc}, {"precision", r.eval->precision}, {"recall", r.eval->recall}, {"f1", r.eval->f1}};
  } else {
    j["eval"] = nullptr;
  }
  j["meta"] = {{"wall_seconds", r.wall_seconds}};
  return j;
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.phase = j.at("phase").get<std::string>();
  r.classification_loss = j.at("classification_loss").get<double>();
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  r.wasserstein = opt("wasserstein");
  r.gradient_penalty = opt("gradient_penalty");
  r.domain_loss = opt("domain_loss");
  if (j.contains("eval") && !j.at("eval").is_null()) {
    const auto& e = j.at("eval");
    r.eval = EvalSnapshot{e.at("auc").get<double>(), e.at("precision").get<double>(), e.at("recall").get<double>(),
                          e.at("f1").get<double>()};
  }
  if (j.contains("meta")) r.wall_seconds = j.at("meta").value("wall_seconds", 0.0);
  return r;
}

EvalSnapshot evaluate_snapshot(const ModelBundle& model, const LabeledPartition& data, double threshold) {
  const Tensor probs = predict_proba(model, data.features);
  EvalSnapshot s;
  const auto counts = confusion(probs.data(), data.labels.data(), threshold);
  const auto r = prf1(counts);
  s.precision = r.precision;
  s.recall = r.recall;
  s.f1 = r.f1;
  try {
    s.auc = auc(probs.data(), data.labels.data());
  } catch (const MetricError&) {
    s.auc = std::nan("");
  }
  return s;
}

CriticStepStats critic_step(ModelBundle& model, const Tensor& source_features, const Tensor& target_features,
                            const TrainConfig& config, std::mt19937_64& rng) {
  const ModelConfig& cfg = model.config;
  Tape tape;
  BoundParams critic(tape, model.critic, true);
  Var zs = tape.constant(source_features);
  Var zt = tape.constant(target_features);
  Var wd = wasserstein_objective(criticize(cfg, critic, zt), criticize(cfg, critic, zs));

  const std::size_t k = std::min(source_features.dim(0), target_features.dim(0));
  const std::size_t d = source_features.dim(1);
  Tensor mix({k, d});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double eps = unit(rng);
    for (std::size_t j = 0; j < d; ++j) {
      mix[i * d + j] = eps * source_features[i * d + j] + (1.0 - eps) * target_features[i * d + j];
    }
  }
  Var points = tape.leaf(std::move(mix), true);
  Var gp;
  if (cfg.penalty_layer == PenaltyLayer::kInput) {
    gp = gradient_penalty([&](Var x) { return criticize(cfg, critic, x); }, points);
  } else {
    Var hidden = critic_first_hidden(cfg, critic, points);
    gp = gradient_penalty([&](Var h) { return critic_from_hidden(cfg, critic, h); }, hidden);
  }
  Var objective = adversarial_objective(wd, gp, config.loss.rho);
  auto grads = param_grads(scale(objective, -1.0), critic);
  CriticStepStats stats{wd.value().item(), gp.value().item()};
  require_finite(stats.wasserstein, "wasserstein estimate");
  require_finite(stats.gradient_penalty, "gradient penalty");
  require_finite(grads, "critic");
  optimizer_step(model.critic, grads, config.optimizer, config.lr_critic);
  return stats;
}

double domain_classifier_step(ModelBundle& model, const Tensor& source_features, const Tensor& target_features,
                              const TrainConfig& config) {
  Tape tape;
  BoundParams critic(tape, model.critic, true);
  Var bce = domain_bce(model.config, critic, tape.constant(source_features), tape.constant(target_features));
  auto grads = param_grads(bce, critic);
  const double value = bce.value().item();
  require_finite(value, "domain loss");
  require_finite(grads, "domain classifier");
  optimizer_step(model.critic, grads, config.optimizer, config.lr_critic);
  return value;
}

double generator_step(ModelBundle& model, const Tensor& source_x, const Tensor& source_y, const Tensor& target_x,
                      const TrainConfig& config, const LossConfig& loss) {
  const ModelConfig& cfg = model.config;
  Tape tape;
  BoundParams extractor(tape, model.extractor, true);
  BoundParams classifier(tape, model.classifier, true);
  Var zs = extract_features(cfg, extractor, tape.constant(source_x));
  Var probs = classify(cfg, classifier, zs);
  Var cls = weighted_focal_loss(probs, source_y, loss);
  Var total = cls;
  const bool domain = is_adversarial(config.mode) && target_x.rank() == 2;
  if (domain) {
    BoundParams critic(tape, model.critic, false);
    Var zt = extract_features(cfg, extractor, tape.constant(target_x));
    if (config.mode == TrainMode::kDann) {
      total = sub(cls, scale(domain_bce(cfg, critic, zs, zt), loss.lambda_domain));
    } else {
      Var wd = wasserstein_objective(criticize(cfg, critic, zt), criticize(cfg, critic, zs));
      total = add(cls, scale(wd, loss.lambda_domain));
    }
  }
  const double value = cls.value().item();
  require_finite(value, "classification loss");
  require_finite(total.value().item(), "generator loss");
  const auto wrt = concat(extractor.vars(), classifier.vars());
  apply_generator_grads(model, grad(total, wrt), config);
  return value;
}

TrainLog pretrain_source(ModelBundle& model, const LabeledPartition& source, const TrainConfig& config,
                         const LabeledPartition* eval, const EpochCallback& on_epoch) {
  config.validate();
  require_both_classes(source.labels, "pretraining data");
  TrainConfig plain = config;
  plain.mode = TrainMode::kSourceOnlyCnn;
  return supervised_epochs(model, source, plain, cross_entropy_loss(), "pretrain", eval, on_epoch);
}

TrainLog adversarial_train(ModelBundle& model, const LabeledPartition& source, const UnlabeledPartition& target,
                           const TrainConfig& config, const LabeledPartition* eval, const EpochCallback& on_epoch) {
  config.validate();
  require_both_classes(source.labels, "source data");
  if (config.batch_size > source.size() || config.batch_size > target.size()) {
    throw ConfigError("batch_size " + std::to_string(config.batch_size) + " exceeds a domain split (source " +
                      std::to_string(source.size()) + ", target " + std::to_string(target.size()) + ")");
  }
  const LossConfig loss = resolve_loss(config, source);
  if (!is_adversarial(config.mode)) {
    return supervised_epochs(model, source, config, loss, "supervised", eval, on_epoch);
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  // Target batches cycle through their own shuffles, independent of the source order.
  const std::uint64_t target_seed = config.seed ^ 0xd1b54a32d192ed03ULL;
  std::uint64_t target_pass = config.epoch_offset;
  std::vector<std::vector<std::size_t>> target_batches;
  std::size_t target_cursor = 0;
  auto next_target = [&]() -> const std::vector<std::size_t>& {
    if (target_cursor == target_batches.size()) {
      target_batches = batch_iter(target.size(), config.batch_size, target_seed, target_pass++);
      target_cursor = 0;
    }
    return target_batches[target_cursor++];
  };

  auto critic_updates = [&](const Tensor& zs, const Tensor& zt, Accumulator& wd, Accumulator& gp, Accumulator& dl) {
    if (config.mode == TrainMode::kDann) {
      dl.add(domain_classifier_step(model, zs, zt, config));
      return;
    }
    for (std::size_t c = 0; c < config.n_critic; ++c) {
      const auto s = critic_step(model, zs, zt, config, rng);
      wd.add(s.wasserstein);
      gp.add(s.gradient_penalty);
    }
  };

  auto frozen_features = [&](const Tensor& x) { return extract_features(model, x); };

  if (config.critic_warmup_steps > 0) {
    Accumulator wd, gp, dl;
    const auto batches = batch_iter(source.size(), config.batch_size, config.seed ^ 0xa5a5a5a5ULL, config.epoch_offset);
    for (std::size_t s = 0; s < config.critic_warmup_steps; ++s) {
      const auto& rows = batches[s % batches.size()];
      const auto& trows = next_target();
      const Tensor zs = frozen_features(gather_rows(source.features, rows));
      const Tensor zt = frozen_features(gather_rows(target.features, trows));
      const std::size_t k = std::min(zs.dim(0), zt.dim(0));
      critic_updates(head_rows(zs, k), head_rows(zt, k), wd, gp, dl);
    }
  }

  TrainLog log;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto start = Clock::now();
    const std::size_t epoch = config.epoch_offset + e;
    Accumulator cls, wd, gp, dl;
    for (const auto& rows : batch_iter(source.size(), config.batch_size, config.seed, epoch)) {
      const auto& trows = next_target();
      const std::size_t k = std::min(rows.size(), trows.size());
      Tensor xs = gather_rows(source.features, std::span(rows).first(k));
      Tensor ys({k});
      for (std::size_t i = 0; i < k; ++i) ys[i] = source.labels[rows[i]];
      Tensor xt = gather_rows(target.features, std::span(trows).first(k));

      critic_updates(frozen_features(xs), frozen_features(xt), wd, gp, dl);
      cls.add(generator_step(model, xs, ys, xt, config, loss));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = "adversarial";
    rec.classification_loss = cls.mean().value_or(0.0);
    rec.wasserstein = wd.mean();
    rec.gradient_penalty = gp.mean();
    rec.domain_loss = dl.mean();
    if (eval) rec.eval = evaluate_snapshot(model, *eval, config.threshold);
    rec.wall_seconds = seconds_since(start);
    if (on_epoch) on_epoch(rec);
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

TrainLog train_mode(ModelBundle& model, const DomainDataset& data, const TrainConfig& config,
                    const EpochCallback& on_epoch) {
  config.validate();
  const LabeledPartition* eval = &data.target_test();
  if (config.mode == TrainMode::kTargetOnlyCnn) {
    const LabeledPartition oracle = data.reveal_target_train_labels();
    return pretrain_source(model, oracle, config, eval, on_epoch);
  }
  if (config.mode == TrainMode::kSourceOnlyCnn) return pretrain_source(model, data.source_train(), config, eval, on_epoch);

  TrainConfig pre = config;
  pre.epochs = config.pretrain_epochs();
  TrainLog log = pretrain_source(model, data.source_train(), pre, eval, on_epoch);
  TrainConfig adv = config;
  adv.epochs = config.epochs - pre.epochs;
  adv.epoch_offset = config.epoch_offset + pre.epochs;
  TrainLog tail = adversarial_train(model, data.source_train(), data.target_train(), adv, eval, on_epoch);
  log.epochs.insert(log.epochs.end(), tail.epochs.begin(), tail.epochs.end());
  return log;
}

}  // namespace wdwada
