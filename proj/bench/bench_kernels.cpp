// Serial vs OpenMP kernel comparison. Pairs of benchmarks share inputs so
// the parallel speedup (or single-core overhead) is directly visible.

#include <benchmark/benchmark.h>

#include "pairdistill/dataset.hpp"
#include "pairdistill/pairing.hpp"
#include "pairdistill/scores.hpp"
#include "pairdistill/simulator.hpp"
#include "pairdistill/student.hpp"

using namespace pairdistill;

namespace {

WorldConfig bench_world() {
  WorldConfig wc;
  wc.n_dialogues = 300;
  wc.seed = 9;
  return wc;
}

const Corpus& bench_corpus() {
  static const Corpus corpus = generate_world(bench_world());
  return corpus;
}

std::vector<ScoreVector> bench_scores() {
  std::vector<ScoreVector> scores;
  for (const auto& d : simulate_draws(bench_corpus(), 30, bench_world())) {
    scores.push_back(aggregate(d));
  }
  return scores;
}

void bm_generate_world(benchmark::State& state) {
  const WorldConfig wc = bench_world();
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_world(wc));
  }
}

void bm_generate_world_serial(benchmark::State& state) {
  const WorldConfig wc = bench_world();
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_world_serial(wc));
  }
}

void bm_simulate_draws(benchmark::State& state) {
  const WorldConfig wc = bench_world();
  const Corpus& corpus = bench_corpus();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_draws(corpus, 30, wc));
  }
}

void bm_simulate_draws_serial(benchmark::State& state) {
  const WorldConfig wc = bench_world();
  const Corpus& corpus = bench_corpus();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_draws_serial(corpus, 30, wc));
  }
}

void bm_sample_pairs(benchmark::State& state) {
  const Corpus& corpus = bench_corpus();
  const auto scores = bench_scores();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_pairs(corpus, scores, PairMode::intra, 6, 3));
  }
}

void bm_sample_pairs_serial(benchmark::State& state) {
  const Corpus& corpus = bench_corpus();
  const auto scores = bench_scores();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        sample_pairs_serial(corpus, scores, PairMode::intra, 6, 3));
  }
}

PointwiseData training_set() {
  const Corpus& corpus = bench_corpus();
  const auto scores = bench_scores();
  SegmentTable table = build_segment_table(corpus, scores, 0, 4, 0.6);
  PointwiseData data;
  data.d = table.d;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = table.row(i);
    data.x.insert(data.x.end(), row.begin(), row.end());
    data.target.push_back(table.score[i]);
  }
  return data;
}

void bm_train_pointwise(benchmark::State& state) {
  const PointwiseData data = training_set();
  const StudentModel init = StudentModel::random_init(Arch::mlp1, data.d, 8, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 256;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_pointwise(init, data, cfg));
  }
}

void bm_train_pointwise_serial(benchmark::State& state) {
  const PointwiseData data = training_set();
  const StudentModel init = StudentModel::random_init(Arch::mlp1, data.d, 8, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 256;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_pointwise_serial(init, data, cfg));
  }
}

}  // namespace

BENCHMARK(bm_generate_world)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_generate_world_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_simulate_draws)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_simulate_draws_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sample_pairs)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sample_pairs_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_train_pointwise)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_train_pointwise_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
