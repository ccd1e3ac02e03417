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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "test_util.hpp"
#include "wdwada/checkpoint.hpp"
#include "wdwada/errors.hpp"
#include "wdwada/losses.hpp"
#include "wdwada/networks.hpp"

namespace wdwada {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

void zero_store(ParamStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) store.set(store.name(i), Tensor(store.value(i).shape()));
}

TEST(ShapeChain, DefaultMatchesDocumentedLengths) {
  const ShapeChain c = compute_shape_chain({});
  EXPECT_EQ(c.input, 38u);
  EXPECT_EQ(c.conv1, 17u);
  EXPECT_EQ(c.pool1, 8u);
  EXPECT_EQ(c.conv2, 2u);
  EXPECT_EQ(c.pool2, 1u);
  EXPECT_EQ(c.flattened, 32u);
  EXPECT_EQ(init_model(0).chain.flattened, 32u);
}

TEST(ShapeChain, TooShortInputNamesLayer) {
  ModelConfig cfg;
  cfg.input_len = 12;
  try {
    compute_shape_chain(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("conv2"), std::string::npos) << e.what();
  }
}

TEST(InitModel, SameSeedSameBits) {
  const ModelBundle a = init_model(42), b = init_model(42), c = init_model(43);
  EXPECT_TRUE(a.extractor == b.extractor);
  EXPECT_TRUE(a.classifier == b.classifier);
  EXPECT_TRUE(a.critic == b.critic);
  EXPECT_FALSE(a.extractor == c.extractor);
}

TEST(InitModel, BiasesZeroAndHeScale) {
  const ModelBundle m = init_model(1);
  for (const auto* store : {&m.extractor, &m.classifier, &m.critic}) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      if (store->name(i).ends_with(".bias")) EXPECT_EQ(store->value(i), Tensor(store->value(i).shape()));
    }
  }
  // fc1 of the extractor: fan_in 32, relu follows, sd sqrt(2/32) = 0.25.
  const Tensor& w = m.extractor.get("extractor.fc1.weight");
  double ss = 0.0;
  for (double v : w.data()) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / double(w.numel())), 0.25, 0.03);
}

TEST(InitModel, ZeroOverrideGivesZeroCritic) {
  ModelConfig cfg;
  cfg.init = InitScheme::kZeros;
  const ModelBundle m = init_model(3, cfg);
  std::mt19937_64 rng(1);
  const Tensor scores = criticize(m, random_tensor({5, 32}, rng, -3, 3));
  EXPECT_EQ(scores, Tensor({5}));
}

TEST(ExtractFeatures, OutputShapeAndZeroInput) {
  const ModelBundle m = init_model(5);
  EXPECT_EQ(extract_features(m, Tensor({20000, 38})).shape(), (Shape{20000, 32}));
  EXPECT_EQ(extract_features(m, Tensor({3, 38})), Tensor({3, 32}));
}

TEST(ExtractFeatures, FeatureCountMismatchNamesShapes) {
  const ModelBundle m = init_model(5);
  try {
    extract_features(m, Tensor({4, 37}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("38"), std::string::npos) << msg;
    EXPECT_NE(msg.find("37"), std::string::npos) << msg;
  }
}

TEST(ExtractFeatures, HandTracedIdentityFilters) {
  // Each layer passes channel/unit 0 straight through; the surviving path is
  // feature 0 = max(0, x0, x2, x8, x10).
  ModelBundle m = init_model(0);
  zero_store(m.extractor);
  Tensor c1({16, 1, 6}), c2({32, 16, 6}), f1({32, 64}), f2({64, 32});
  c1[0] = 1.0;
  c2[0] = 1.0;
  f1.at(0, 0) = 1.0;
  f2.at(0, 0) = 1.0;
  m.extractor.set("extractor.conv1.weight", c1);
  m.extractor.set("extractor.conv2.weight", c2);
  m.extractor.set("extractor.fc1.weight", f1);
  m.extractor.set("extractor.fc2.weight", f2);

  std::vector<double> x(38);
  for (std::size_t i = 0; i < 38; ++i) x[i] = -5.0 + 0.25 * double(i);  // negative up to index 19
  x[8] = 3.5;
  x[10] = 4.25;
  x[2] = 4.0;
  x[5] = 100.0;  // odd positions never reach feature 0
  const Tensor z = extract_features(m, Tensor({1, 38}, x));
  EXPECT_DOUBLE_EQ(z[0], 4.25);
  for (std::size_t j = 1; j < 32; ++j) EXPECT_EQ(z[j], 0.0);
}

TEST(Classify, ZeroWeightsGiveHalf) {
  ModelBundle m = init_model(2);
  zero_store(m.classifier);
  std::mt19937_64 rng(2);
  const Tensor p = classify(m, random_tensor({6, 32}, rng, -2, 2));
  for (double v : p.data()) EXPECT_EQ(v, 0.5);
}

TEST(Classify, FinalBiasIsMonotoneAndOutputsOpen) {
  ModelBundle m = init_model(2);
  std::mt19937_64 rng(4);
  const Tensor z = random_tensor({10, 32}, rng, -2, 2);
  const Tensor before = classify(m, z);
  m.classifier.set("classifier.fc2.bias", Tensor({1}, {0.5}));
  const Tensor after = classify(m, z);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_GT(after[i], before[i]);
    EXPECT_GT(before[i], 0.0);
    EXPECT_LT(before[i], 1.0);
  }
}

TEST(Criticize, LinearCriticIsDotProduct) {
  ModelConfig cfg;
  cfg.critic_hidden = {};
  ModelBundle m = init_model(0, cfg);
  std::mt19937_64 rng(6);
  const Tensor u = random_tensor({32, 1}, rng);
  m.critic.set("critic.fc1.weight", u);
  const Tensor f = random_tensor({4, 32}, rng);
  const Tensor s = criticize(m, f);
  for (std::size_t i = 0; i < 4; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < 32; ++j) dot += u[j] * f.at(i, j);
    EXPECT_NEAR(s[i], dot, 1e-14);
  }
}

TEST(Criticize, IdenticalBatchesHaveZeroGap) {
  const ModelBundle m = init_model(8);
  std::mt19937_64 rng(8);
  const Tensor f = random_tensor({7, 32}, rng);
  EXPECT_EQ(wasserstein_objective(criticize(m, f), criticize(m, f)), 0.0);
}

TEST(Criticize, HomogeneousInLastLayerWeights) {
  ModelBundle m = init_model(9);
  std::mt19937_64 rng(9);
  const Tensor f = random_tensor({5, 32}, rng);
  const Tensor s = criticize(m, f);
  Tensor w = m.critic.get("critic.fc3.weight");
  for (auto& v : w.data()) v *= -2.5;
  m.critic.set("critic.fc3.weight", w);
  const Tensor s2 = criticize(m, f);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(s2[i], -2.5 * s[i], 1e-12);
}

TEST(Criticize, SplitAtFirstHiddenAgrees) {
  const ModelBundle m = init_model(10);
  std::mt19937_64 rng(10);
  Tape tape;
  BoundParams p(tape, m.critic, false);
  auto f = tape.constant(random_tensor({3, 32}, rng));
  EXPECT_EQ(criticize(m.config, p, f).value(),
            critic_from_hidden(m.config, p, critic_first_hidden(m.config, p, f)).value());
}

// Full model gradients against central differences on a 4-sample batch.
TEST(ModelGradients, ExtractorAndClassifierMatchFiniteDifferences) {
  ModelBundle m = init_model(12);
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({4, 38}, rng, -2, 2);
  const Tensor y({4}, {1, 0, 0, 1});
  auto loss = [&]() {
    Tape tape;
    NoGradGuard g(tape);
    BoundParams e(tape, m.extractor, false), c(tape, m.classifier, false);
    return cross_entropy(classify(m.config, c, extract_features(m.config, e, tape.constant(x))), y).value().item();
  };
  Tape tape;
  BoundParams e(tape, m.extractor, true), c(tape, m.classifier, true);
  auto l = cross_entropy(classify(m.config, c, extract_features(m.config, e, tape.constant(x))), y);
  const auto ge = param_grads(l, e);
  const auto gc = param_grads(l, c);
  EXPECT_LT(testing::max_relative_error(ge, testing::numeric_param_grads(m.extractor, loss)), 1e-5);
  EXPECT_LT(testing::max_relative_error(gc, testing::numeric_param_grads(m.classifier, loss)), 1e-5);
}

TEST(ModelGradients, CriticMatchesFiniteDifferences) {
  ModelBundle m = init_model(13);
  std::mt19937_64 rng(13);
  const Tensor zt = random_tensor({4, 32}, rng), zs = random_tensor({4, 32}, rng);
  // The score gap alone has an identically zero output-bias gradient; the
  // squared-score term makes every parameter's gradient informative.
  auto build = [&](Tape& tape, const BoundParams& p) {
    Var st = criticize(m.config, p, tape.constant(zt));
    return add(wasserstein_objective(st, criticize(m.config, p, tape.constant(zs))), scale(mean(pow(st, 2.0)), 0.5));
  };
  auto loss = [&]() {
    Tape tape;
    BoundParams p(tape, m.critic, false);
    return build(tape, p).value().item();
  };
  Tape tape;
  BoundParams p(tape, m.critic, true);
  Var l = build(tape, p);
  EXPECT_LT(testing::max_relative_error(param_grads(l, p), testing::numeric_param_grads(m.critic, loss)), 1e-5);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path dir = fs::temp_directory_path() / "wdwada_ckpt_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ModelConfig cfg;
  cfg.penalty_layer = PenaltyLayer::kFirstHidden;
  const ModelBundle m = init_model(77, cfg);
  save_checkpoint(m, dir / "a");
  const ModelBundle loaded = load_checkpoint(dir / "a");
  EXPECT_TRUE(loaded.extractor == m.extractor);
  EXPECT_TRUE(loaded.classifier == m.classifier);
  EXPECT_TRUE(loaded.critic == m.critic);
  EXPECT_EQ(loaded.config.penalty_layer, PenaltyLayer::kFirstHidden);
  save_checkpoint(loaded, dir / "b");
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(bytes(dir / "a.bin"), bytes(dir / "b.bin"));
  EXPECT_EQ(bytes(dir / "a.json"), bytes(dir / "b.json"));
  fs::remove_all(dir);
}

TEST(Checkpoint, TruncatedPayloadIsRejected) {
  const fs::path dir = fs::temp_directory_path() / "wdwada_ckpt_trunc";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_checkpoint(init_model(1), dir / "m");
  fs::resize_file(dir / "m.bin", 100);
  EXPECT_THROW(load_checkpoint(dir / "m"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing"), DataError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace wdwada
