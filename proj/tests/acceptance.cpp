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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion numbers to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "wdwada/errors.hpp"
#include "wdwada/experiment.hpp"
#include "wdwada/losses.hpp"
#include "wdwada/metrics.hpp"
#include "wdwada/networks.hpp"
#include "wdwada/training.hpp"

namespace wdwada {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using testing::random_tensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* f = "%.3f") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// Relative error over a whole network's gradient, all parameters concatenated.
double network_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  std::vector<double> x, y;
  for (const auto& t : a) x.insert(x.end(), t.data().begin(), t.data().end());
  for (const auto& t : b) y.insert(y.end(), t.data().begin(), t.data().end());
  return testing::relative_error(x, y);
}

using GraphLoss = std::function<Var(Tape&, const BoundParams&, const BoundParams&, const BoundParams&)>;

// Analytic vs central-difference gradients of `loss` for the parameter stores
// it depends on (bit 0 extractor, 1 classifier, 2 critic); returns the worst
// network-level relative error.
double check_model_loss(ModelBundle& m, const GraphLoss& loss, unsigned stores_used) {
  Tape tape;
  BoundParams e(tape, m.extractor, true), c(tape, m.classifier, true), d(tape, m.critic, true);
  Var l = loss(tape, e, c, d);
  const std::vector<std::vector<Tensor>> analytic{param_grads(l, e), param_grads(l, c), param_grads(l, d)};
  auto value = [&]() {
    Tape t;
    BoundParams e2(t, m.extractor, false), c2(t, m.classifier, false), d2(t, m.critic, false);
    return loss(t, e2, c2, d2).value().item();
  };
  ParamStore* stores[] = {&m.extractor, &m.classifier, &m.critic};
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (!(stores_used & (1u << k))) continue;
    const auto numeric = testing::numeric_param_grads(*stores[k], value, 1e-5);
    worst = std::max(worst, network_error(analytic[k], numeric));
  }
  return worst;
}

Outcome criterion_gradients() {
  double worst = 0.0;
  std::vector<std::string> names;
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    ModelBundle m = init_model(100 + seed);
    std::mt19937_64 rng(seed);
    const Tensor xs = random_tensor({4, 38}, rng, -2, 2), xt = random_tensor({4, 38}, rng, -2, 2);
    const Tensor y({4}, {1, 0, 1, 0});
    auto probs = [&](Tape& t, const BoundParams& e, const BoundParams& c) {
      return classify(m.config, c, extract_features(m.config, e, t.constant(xs)));
    };
    const std::vector<std::pair<GraphLoss, unsigned>> losses{
        {[&](Tape& t, const BoundParams& e, const BoundParams& c,
                              const BoundParams&) { return cross_entropy(probs(t, e, c), y); },
         3u},
        {         [&](Tape& t, const BoundParams& e, const BoundParams& c, const BoundParams&) {
           return weighted_focal_loss(probs(t, e, c), y, 2.0, 3.0);
         },
         3u},
        {         [&](Tape& t, const BoundParams& e, const BoundParams&, const BoundParams& d) {
           Var st = criticize(m.config, d, extract_features(m.config, e, t.constant(xt)));
           Var ss = criticize(m.config, d, extract_features(m.config, e, t.constant(xs)));
           // The squared-score term gives the critic output bias a nonzero gradient.
           return add(wasserstein_objective(st, ss), scale(mean(pow(st, 2.0)), 0.5));
         },
         5u},
        {         [&](Tape& t, const BoundParams& e, const BoundParams&, const BoundParams& d) {
           Var st = criticize(m.config, d, extract_features(m.config, e, t.constant(xt)));
           return cross_entropy(sigmoid(st), Tensor({4}, {1, 1, 1, 1}));
         },
         5u},
    };
    for (const auto& [loss, used] : losses) worst = std::max(worst, check_model_loss(m, loss, used));
  }
  return {worst < 1e-5, "G_f, G_y, G_d x {cross_entropy, weighted_focal, wasserstein, domain_bce}: max relative error " +
                            fmt("%.2e", worst) + " (limit 1e-5)"};
}

Outcome criterion_second_order() {
  double worst = 0.0;
  for (auto layer : {PenaltyLayer::kInput, PenaltyLayer::kFirstHidden}) {
    ModelConfig cfg;
    cfg.penalty_layer = layer;
    ModelBundle m = init_model(31, cfg);
    std::mt19937_64 rng(31);
    const Tensor h0 = random_tensor({4, 32}, rng, -2, 2);
    auto build = [&](Tape& tape, const BoundParams& p) {
      auto h = tape.leaf(h0);
      if (layer == PenaltyLayer::kInput) return gradient_penalty([&](Var x) { return criticize(cfg, p, x); }, h);
      auto hidden = critic_first_hidden(cfg, p, h);
      return gradient_penalty([&](Var x) { return critic_from_hidden(cfg, p, x); }, hidden);
    };
    auto value = [&]() {
      Tape tape;
      BoundParams p(tape, m.critic, true);
      return build(tape, p).value().item();
    };
    Tape tape;
    BoundParams p(tape, m.critic, true);
    const auto analytic = param_grads(build(tape, p), p);
    worst = std::max(worst, network_error(analytic, testing::numeric_param_grads(m.critic, value)));
  }
  Tape tape;
  auto x = tape.leaf(Tensor::scalar(1.0));
  auto dy = grad(mul(mul(x, x), x), {&x, 1}, true)[0];
  const double cube = grad(mul(dy, dy), {&x, 1})[0].value().item();
  const bool ok = worst < 1e-4 && std::abs(cube - 36.0) < 1e-8;
  return {ok, "penalty parameter gradient relative error " + fmt("%.2e", worst) +
                  " (limit 1e-4); d/dx[(d(x^3)/dx)^2] at 1 = " + fmt("%.12f", cube)};
}

Outcome criterion_loss_identities() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  double worst_focal = 0.0;
  for (int b = 0; b < 1000; ++b) {
    const std::size_t n = 1 + rng() % 32;
    Tensor p({n}), y({n});
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = u(rng);
      y[i] = double(rng() % 2);
    }
    worst_focal = std::max(worst_focal, std::abs(weighted_focal_loss(p, y, 0.0, 1.0) - cross_entropy(p, y)));
  }
  double worst_penalty = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w = random_tensor({32, 1}, rng);
    double n2 = 0.0;
    for (double v : w.data()) n2 += v * v;
    for (auto& v : w.data()) v /= std::sqrt(n2);
    Tape tape;
    auto wv = tape.leaf(w);
    auto h = tape.leaf(random_tensor({8, 32}, rng, -3, 3));
    auto critic = [&](Var x) { return reshape(matmul(x, wv), {x.value().dim(0)}); };
    worst_penalty = std::max(worst_penalty, std::abs(gradient_penalty(critic, h).value().item()));
  }
  double worst_anti = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor a = random_tensor({1 + rng() % 16}, rng, -5, 5), b = random_tensor({1 + rng() % 16}, rng, -5, 5);
    worst_anti = std::max(worst_anti, std::abs(wasserstein_objective(a, b) + wasserstein_objective(b, a)));
  }
  const bool ok = worst_focal <= 1e-12 && worst_penalty <= 1e-12 && worst_anti <= 1e-12;
  return {ok, "focal(r=0,a=1) vs CE max diff " + fmt("%.1e", worst_focal) + " over 1000 batches; unit-norm penalty " +
                  fmt("%.1e", worst_penalty) + "; antisymmetry " + fmt("%.1e", worst_anti)};
}

// Trains a critic on two fixed 1-D samples and returns the objective on the full samples.
double wasserstein_estimate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const std::size_t n = 10000;
  Tensor s({n, 1}), t({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = normal(rng);
    t[i] = 2.0 + normal(rng);
  }
  ModelConfig cfg;
  cfg.critic_input = 1;
  ModelBundle m = init_model(seed, cfg);
  TrainConfig tc;
  tc.lr_critic = 1e-3;
  std::mt19937_64 step_rng(seed + 1);
  const std::size_t batch = 250, steps = 1500;  // 40 full batches per pass
  for (std::size_t k = 0; k < steps; ++k) {
    const auto bs = batch_iter(n, batch, seed, k / (n / batch));
    const auto bt = batch_iter(n, batch, seed + 7, k / (n / batch));
    const auto& rs = bs[k % bs.size()];
    const auto& rt = bt[k % bt.size()];
    Tensor xs({batch, 1}), xt({batch, 1});
    for (std::size_t i = 0; i < batch; ++i) {
      xs[i] = s[rs[i]];
      xt[i] = t[rt[i]];
    }
    critic_step(m, xs, xt, tc, step_rng);
  }
  return wasserstein_objective(criticize(m, t), criticize(m, s));
}

Outcome criterion_wasserstein_oracle() {
  std::vector<double> est;
  for (std::uint64_t seed = 0; seed < 3; ++seed) est.push_back(wasserstein_estimate(seed));
  const double med = median(est);
  return {std::abs(med - 2.0) <= 0.5, "critic estimates " + join(est) + ", median " + fmt("%.3f", med) +
                                          " vs closed form 2 (tolerance 25%)"};
}

Outcome criterion_shape() {
  const ModelConfig cfg;
  const ShapeChain c = compute_shape_chain(cfg);
  const ModelBundle m = init_model(0);
  const Tensor f = extract_features(m, Tensor({3, 38}));
  const bool ok = c.input == 38 && c.conv1 == 17 && c.pool1 == 8 && c.conv2 == 2 && c.pool2 == 1 && c.flattened == 32 &&
                  f.dim(0) == 3 && f.dim(1) == 32;
  std::ostringstream s;
  s << "chain " << c.input << "->" << c.conv1 << "->" << c.pool1 << "->" << c.conv2 << "->" << c.pool2
    << ", feature output [" << f.dim(0) << " x " << f.dim(1) << "]";
  return {ok, s.str()};
}

Outcome criterion_metric_oracles() {
  std::mt19937_64 rng(9);
  std::size_t mismatches = 0;
  double worst_area = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 5);  // coarse scores force ties
      y[i] = double(i < 1 ? 0 : i < 2 ? 1 : rng() % 2);
    }
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] == 1.0 && y[j] == 0.0) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
      }
    }
    const double a = auc(s, y);
    if (a != wins / pairs) ++mismatches;
    const auto roc = roc_curve(s, y);
    worst_area = std::max(worst_area, std::abs(trapezoid_area(roc) - a));
  }
  return {mismatches == 0 && worst_area <= 1e-10, std::to_string(mismatches) +
                                                      " brute-force mismatches in 1000 trials (n <= 12); max |trapezoid - auc| " +
                                                      fmt("%.1e", worst_area)};
}

Outcome criterion_ci_oracle(const std::optional<RobustnessSummary>& wada, const std::optional<RobustnessSummary>& dann) {
  const auto r = robustness_summary(std::vector<double>{0.78, 0.79, 0.80, 0.81, 0.82});
  std::string detail = "half-width " + fmt("%.5f", r.half_width) + " (expected 0.0196 +- 0.0005)";
  if (wada && dann) {
    detail += "; canonical AUC CI width wd_wada " + fmt("%.4f", wada->width()) + ", dann " + fmt("%.4f", dann->width()) +
              " (reported, not gated)";
  }
  return {std::abs(r.half_width - 0.0196) <= 0.0005, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome criterion_determinism(const fs::path& scratch) {
  const std::string base = std::string(WDWADA_CLI_PATH) +
                           " train --synthetic --mode wd_wada --n-source 2000 --n-target 600 --epochs 3 --runs 2 -o ";
  for (const char* d : {"a", "b"}) {
    const std::string cmd = base + (scratch / d).string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "train command failed"};
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(scratch / "a")) {
    const auto name = entry.path().filename().string();
    if (name != "metrics.json" && name != "summary.json" && name != "roc.csv") continue;
    const auto rel = fs::relative(entry.path(), scratch / "a");
    ++compared;
    if (slurp(entry.path()) != slurp(scratch / "b" / rel)) ++differing;
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " metric files compared, " + std::to_string(differing) + " differ"};
}

struct ModeRuns {
  std::vector<double> auc, f1, precision, first_wd, final_wd, final_gp;
  std::optional<RobustnessSummary> auc_summary;
  double seconds = 0.0;
};

ModeRuns run_mode(ExperimentSpec spec, TrainMode mode, double shift, const fs::path& dir) {
  spec.train.mode = mode;
  spec.synthetic->shift = shift;
  spec.output_dir = dir / (to_string(mode) + "_shift" + fmt("%g", shift));
  const auto start = Clock::now();
  const ExperimentResult result = run_experiment(spec);
  ModeRuns out;
  out.seconds = seconds_since(start);
  out.auc_summary = result.auc_summary;
  for (const auto& r : result.runs) {
    out.auc.push_back(r.report.auc);
    out.f1.push_back(r.report.scores.f1);
    out.precision.push_back(r.report.scores.precision);
    char sub[32];
    std::snprintf(sub, sizeof sub, "run_%03zu", r.index);
    std::ifstream log(spec.output_dir / sub / "trainlog.jsonl");
    std::vector<EpochRecord> epochs;
    for (std::string line; std::getline(log, line);) epochs.push_back(epoch_record_from_json(nlohmann::json::parse(line)));
    std::vector<const EpochRecord*> adv;
    for (const auto& e : epochs) {
      if (e.wasserstein) adv.push_back(&e);
    }
    if (!adv.empty()) {
      out.first_wd.push_back(*adv.front()->wasserstein);
      out.final_wd.push_back(*adv.back()->wasserstein);
      out.final_gp.push_back(*adv.back()->gradient_penalty);
    }
  }
  std::cout << "  [" << to_string(mode) << ", shift " << shift << "] auc " << join(out.auc) << " | f1 "
            << join(out.f1) << " | precision " << join(out.precision) << " (" << fmt("%.0f", out.seconds) << " s)"
            << std::endl;
  return out;
}

class Suite {
 public:
  explicit Suite(std::set<int> only) : only_(std::move(only)) {}

  bool wants(int id) const { return only_.empty() || only_.count(id); }

  void record(int id, const std::string& name, const Outcome& o, double seconds, double limit = 0.0) {
    bool pass = o.pass;
    std::string detail = o.detail + " [" + fmt("%.1f", seconds) + " s";
    if (limit > 0.0) {
      detail += ", limit " + fmt("%.0f", limit) + " s";
      pass = pass && seconds < limit;
    }
    detail += "]";
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << detail << std::endl;
    failures_ += pass ? 0 : 1;
  }

  template <class F>
  void run(int id, const std::string& name, double limit, F&& f) {
    if (!wants(id)) return;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    record(id, name, o, seconds_since(start), limit);
  }

  int failures() const { return failures_; }

 private:
  std::set<int> only_;
  int failures_ = 0;
};

int run_suite(const std::set<int>& only) {
  const auto suite_start = Clock::now();
  Suite suite(only);
  const fs::path scratch = fs::temp_directory_path() / "wdwada_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  suite.run(1, "gradient correctness", 30.0, criterion_gradients);
  suite.run(2, "second-order correctness", 10.0, criterion_second_order);
  suite.run(3, "loss identities", 0.0, criterion_loss_identities);
  suite.run(4, "wasserstein oracle", 120.0, criterion_wasserstein_oracle);

  const bool need_shift = suite.wants(5) || suite.wants(6) || suite.wants(7);
  std::optional<ModeRuns> cnn, ada, wada, dann, cnn0, wada0;
  ExperimentSpec spec;
  std::string canonical_error;
  try {
    spec = load_experiment_file(fs::path(WDWADA_SOURCE_DIR) / "configs" / "canonical.json");
  } catch (const std::exception& e) {
    canonical_error = e.what();
  }
  auto canonical = [&](TrainMode mode, double shift) {
    if (!canonical_error.empty()) throw ConfigError("canonical config: " + canonical_error);
    return run_mode(spec, mode, shift, scratch);
  };

  if (need_shift) {
    suite.run(5, "transfer benefit", 600.0, [&]() -> Outcome {
      cnn = canonical(TrainMode::kSourceOnlyCnn, 2.0);
      ada = canonical(TrainMode::kWdAda, 2.0);
      wada = canonical(TrainMode::kWdWada, 2.0);
      const double c = median(cnn->auc), a = median(ada->auc), w = median(wada->auc);
      return {w >= a && a >= c && w - c >= 0.05, "median target AUC wd_wada " + fmt("%.4f", w) + " >= wd_ada " +
                                                     fmt("%.4f", a) + " >= source_only_cnn " + fmt("%.4f", c) +
                                                     "; gain " + fmt("%.4f", w - c) + " (need >= 0.05)"};
    });
  }
  if (suite.wants(6)) {
    suite.run(6, "imbalance benefit", 0.0, [&]() -> Outcome {
      if (!ada) ada = canonical(TrainMode::kWdAda, 2.0);
      if (!wada) wada = canonical(TrainMode::kWdWada, 2.0);
      const double w = median(wada->f1), a = median(ada->f1);
      return {w - a >= 0.02, "median F1@0.5 wd_wada " + fmt("%.4f", w) + " vs wd_ada " + fmt("%.4f", a) + "; gap " +
                                 fmt("%.4f", w - a) + " (need >= 0.02)"};
    });
  }
  if (suite.wants(7)) {
    suite.run(7, "robustness protocol", 0.0, [&]() -> Outcome {
      try {
        if (!wada) wada = canonical(TrainMode::kWdWada, 2.0);
        dann = canonical(TrainMode::kDann, 2.0);
      } catch (const std::exception& e) {
        std::cout << "  canonical CI runs unavailable: " << e.what() << std::endl;
      }
      return criterion_ci_oracle(wada ? wada->auc_summary : std::nullopt, dann ? dann->auc_summary : std::nullopt);
    });
  }
  suite.run(8, "shape contract", 0.0, criterion_shape);
  suite.run(9, "metric oracles", 0.0, criterion_metric_oracles);
  suite.run(10, "no-shift safety", 0.0, [&]() -> Outcome {
    cnn0 = canonical(TrainMode::kSourceOnlyCnn, 0.0);
    wada0 = canonical(TrainMode::kWdWada, 0.0);
    const double c = median(cnn0->auc), w = median(wada0->auc);
    return {std::abs(w - c) <= 0.03, "shift 0 median AUC wd_wada " + fmt("%.4f", w) + " vs source_only_cnn " +
                                         fmt("%.4f", c) + "; |diff| " + fmt("%.4f", std::abs(w - c)) +
                                         " (limit 0.03)"};
  });
  suite.run(11, "determinism", 0.0, [&]() { return criterion_determinism(scratch / "determinism"); });

  if (wada && !wada->final_wd.empty()) {
    std::cout << "INFO wd_wada wasserstein estimate first adversarial epoch median " << fmt("%.4f", median(wada->first_wd))
              << ", final epoch median " << fmt("%.4f", median(wada->final_wd)) << "; final gradient penalty median "
              << fmt("%.4f", median(wada->final_gp)) << std::endl;
  }
  std::cout << "INFO total " << fmt("%.0f", seconds_since(suite_start)) << " s, " << suite.failures()
            << " criteria failed" << std::endl;
  fs::remove_all(scratch);
  return suite.failures() == 0 ? 0 : 1;
}

}  // namespace
}  // namespace wdwada

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  return wdwada::run_suite(only);
}
