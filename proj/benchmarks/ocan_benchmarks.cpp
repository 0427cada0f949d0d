#include <benchmark/benchmark.h>

#include <vector>

#include "ocan/autoencoder.hpp"
#include "ocan/data_io.hpp"
#include "ocan/detector.hpp"
#include "ocan/gan.hpp"
#include "ocan/platform.hpp"
#include "ocan/rng.hpp"
#include "ocan/tape.hpp"

namespace ocan {
namespace {

constexpr Index kWidth = 4;

SequenceCorpus corpus(std::size_t users) {
  SyntheticConfig sc;
  sc.benign_users = users / 2;
  sc.malicious_users = users - users / 2;
  sc.seed = 1;
  return generate_synthetic(sc);
}

// Encoder forward pass over one sequence of state.range(1) steps.
void BM_LstmUnroll(benchmark::State& state) {
  const Index hidden = state.range(0), steps = state.range(1);
  SeededRng rng(2);
  const LstmAutoencoder ae = LstmAutoencoder::random(kWidth, hidden, OutputActivation::kSigmoid, rng);
  ActivitySequence seq{"u", Tensor(steps, kWidth)};
  for (Index k = 0; k < seq.steps.size(); ++k) seq.steps[k] = rng.bernoulli(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(ae.encode(seq));
  state.SetItemsProcessed(state.iterations() * steps);
}
BENCHMARK(BM_LstmUnroll)->Args({200, 27})->Args({200, 50})->Args({64, 50});

// Forward plus backward of the autoencoder loss on a 32-user minibatch.
void BM_AutoencoderBatchLoss(benchmark::State& state) {
  SeededRng rng(3);
  LstmAutoencoder ae = LstmAutoencoder::random(kWidth, state.range(0), OutputActivation::kSigmoid, rng);
  const SequenceCorpus c = corpus(32);
  std::vector<const ActivitySequence*> batch;
  for (const auto& s : c.sequences) batch.push_back(&s);
  for (auto _ : state) {
    Tape tape;
    Var loss = ae.batch_loss(tape, batch);
    tape.backward(loss);
    ae.params().zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_AutoencoderBatchLoss)->Arg(200)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  SeededRng rng(4);
  const Generator g = Generator::random(200, rng);
  const Tensor z = sample_noise(rng, state.range(0), 50);
  for (auto _ : state) benchmark::DoNotOptimize(g.generate(z));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorForward)->Arg(32)->Arg(600);

void BM_DiscriminatorForward(benchmark::State& state) {
  SeededRng rng(5);
  const Discriminator d = Discriminator::random(200, rng);
  Tensor v(state.range(0), 200);
  for (Index k = 0; k < v.size(); ++k) v[k] = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(d.p_benign(v));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DiscriminatorForward)->Arg(32)->Arg(600);

// End-to-end scoring throughput of a hidden-200 model.
void BM_ScoreBatch(benchmark::State& state) {
  SeededRng rng(6);
  OcanModel m;
  m.encoder = EncoderKind::kLstm;
  m.input_width = kWidth;
  m.lstm = LstmAutoencoder::random(kWidth, 200, OutputActivation::kSigmoid, rng);
  m.discriminator = Discriminator::random(200, rng);
  const FraudDetector det(m);
  const SequenceCorpus c = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(det.score_batch(c.sequences));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreBatch)->Arg(600)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace ocan

int main(int argc, char** argv) {
  ocan::tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
