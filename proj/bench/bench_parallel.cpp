// Serial reference vs OpenMP kernels on a synthetic corpus.

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "geoattack/harness.hpp"
#include "geoattack/train.hpp"

using namespace geoattack;

namespace {

struct Fixture {
  Dataset data;
  std::shared_ptr<const Vocabulary> vocab;
  std::optional<Classifier> clf;
  std::vector<EncodedExample> encoded;
  SynonymLexicon lexicon;

  Fixture() {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> word(0, 499), len(20, 120);
    data.label_names = {"neg", "pos"};
    for (int i = 0; i < 256; ++i) {
      Example ex;
      ex.id = std::to_string(i);
      ex.label = static_cast<std::size_t>(i % 2);
      const int n = len(rng);
      for (int t = 0; t < n; ++t) ex.tokens.push_back(Token::from_surface("w" + std::to_string(word(rng))));
      // A marker word makes the labels learnable.
      ex.tokens.push_back(Token::from_surface(i % 2 ? "good" : "bad"));
      data.examples.push_back(std::move(ex));
    }
    vocab = std::make_shared<const Vocabulary>(Vocabulary::build(data));
    TrainConfig cfg;
    cfg.hidden = 64;
    cfg.embedding_dim = 32;
    cfg.seed = 3;
    clf.emplace(make_classifier(vocab, nullptr, data.label_names, cfg));
    encoded = encode_dataset(data, *vocab);
    for (int w = 0; w < 500; w += 2) lexicon.add("w" + std::to_string(w), {"w" + std::to_string(w + 1)});
    lexicon.add("good", {"w7"});
    lexicon.add("bad", {"w8"});
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

std::vector<std::size_t> batch_of(std::size_t n) {
  std::vector<std::size_t> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = i;
  return b;
}

void BM_BatchGradientSerial(benchmark::State& state) {
  auto& f = fixture();
  const auto batch = batch_of(64);
  Gradient g = Gradient::zeros_like(f.clf->params());
  for (auto _ : state) benchmark::DoNotOptimize(Trainer::batch_gradient_serial(*f.clf, f.encoded, batch, g));
}

void BM_BatchGradientParallel(benchmark::State& state) {
  auto& f = fixture();
  Classifier clf = *f.clf;
  TrainConfig cfg;
  cfg.workers = static_cast<int>(state.range(0));
  Trainer trainer(clf, cfg);
  const auto batch = batch_of(64);
  Gradient g = Gradient::zeros_like(clf.params());
  for (auto _ : state) benchmark::DoNotOptimize(trainer.batch_gradient(f.encoded, batch, g));
}

void BM_AccuracySerial(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(accuracy_serial(*f.clf, f.encoded));
}

void BM_AccuracyParallel(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(accuracy(*f.clf, f.encoded, static_cast<int>(state.range(0))));
}

void BM_EvaluateAttackSerial(benchmark::State& state) {
  auto& f = fixture();
  EvaluationOptions opts;
  opts.sample_limit = 32;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(evaluate_attack_serial(*f.clf, f.data, f.lexicon, AttackConfig{}, opts));
    } catch (const EvaluationError&) {
    }
  }
}

void BM_EvaluateAttackParallel(benchmark::State& state) {
  auto& f = fixture();
  EvaluationOptions opts;
  opts.sample_limit = 32;
  opts.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(evaluate_attack(*f.clf, f.data, f.lexicon, AttackConfig{}, opts));
    } catch (const EvaluationError&) {
    }
  }
}

}  // namespace

BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccuracySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccuracyParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateAttackSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateAttackParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
