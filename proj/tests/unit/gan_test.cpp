#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "ocan/errors.hpp"
#include "ocan/gan.hpp"
#include "ocan/gradcheck.hpp"
#include "oracles.hpp"

namespace ocan {
namespace {

// Frozen from tests/oracles/reference_values.py.
constexpr double kFake[] = {-0.8420832872399974, -0.7572594143399569, -0.5492214982795198,
                            0.8187646545466649,  0.8900077421787698,  0.904860880990494,
                            0.8187646545466649,  0.8900077421787698,  0.904860880990494,
                            0.7653308806093646,  0.8409102488178676,  0.8548481381012963};
constexpr double kPReal[] = {0.8550748057211087, 0.5276944363073359, 0.5276944363073359};
constexpr double kPFake[] = {0.5276944363073359, 0.5244477023890393, 0.5244477023890393, 0.5276944363073359};
constexpr double kPProxy[] = {0.859481924319137, 0.7776131327182777, 0.7776131327182777, 0.7684290357321119};
constexpr double kRegularD = -1.2250511322440782;
constexpr double kRegularG = -0.7467037703681659;
constexpr double kNonSaturatingG = 0.6423237237444364;
constexpr double kOcanD = -1.494557953817957;
constexpr double kPullAway = 0.9992925290339262;
constexpr double kFeatureMatching = 1.388070842476361;
constexpr double kDensityEps = 0.7776131327182777;
constexpr double kDensityTerm = -0.0378563712102375;
constexpr double kComplementaryG = 2.3495070003000498;

struct Reference {
  Generator g = Generator::zeros(3, 2, 3);
  Discriminator d = Discriminator::zeros(3, 4, 2);
  Discriminator proxy = Discriminator::zeros(3, 4, 2);
  Tensor real = test::cos_inputs(3, 3, 0.2, 1.5);
  Tensor z = test::cos_inputs(4, 2, 0.9);

  Reference() {
    test::fill_group(g.params(), 0.5, 1.5);
    test::fill_group(d.params(), 0.11, 1.5);
    test::fill_group(proxy.params(), 5.2, 1.5);
  }
};

Var column(Tape& t, const std::vector<double>& v) {
  return t.constant(Tensor::from_vector(static_cast<Index>(v.size()), 1, v));
}

Var rows_var(Tape& t, const oracle::Rows& rows) {
  Tensor m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return t.constant(m);
}

std::vector<double> random_probs(SeededRng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& x : p) {
    // Mix in exact 0/1 values so the clamp is exercised.
    const double u = rng.uniform();
    x = u < 0.05 ? 0.0 : u > 0.95 ? 1.0 : rng.uniform();
  }
  return p;
}

oracle::Rows random_rows(SeededRng& rng, std::size_t n, std::size_t w) {
  oracle::Rows r(n, std::vector<double>(w));
  for (auto& row : r) {
    for (auto& x : row) x = rng.uniform(-2.0, 2.0);
  }
  return r;
}

TEST(Generator, MatchesReferenceValues) {
  Reference ref;
  const Tensor fake = ref.g.generate(ref.z);
  ASSERT_EQ(fake.rows(), 4);
  for (Index k = 0; k < 12; ++k) EXPECT_NEAR(fake[k], kFake[k], 1e-12);
}

TEST(Generator, ZeroParametersGiveZeroOutput) {
  Generator g = Generator::zeros(200);
  SeededRng rng(1);
  const Tensor out = g.generate(sample_noise(rng, 32, 50));
  EXPECT_EQ(out.rows(), 32);
  EXPECT_EQ(out.cols(), 200);
  for (double x : out.data()) EXPECT_EQ(x, 0.0);
}

TEST(Generator, OutputsInOpenUnitBoxAndDeterministic) {
  SeededRng rng(2);
  Generator g = Generator::random(200, rng);
  SeededRng n1(3), n2(3);
  const Tensor a = g.generate(sample_noise(n1, 32, 50));
  EXPECT_TRUE(a == g.generate(sample_noise(n2, 32, 50)));
  for (double x : a.data()) EXPECT_LT(std::abs(x), 1.0);
  EXPECT_THROW(g.generate(Tensor(2, 49)), ShapeError);
}

TEST(Discriminator, MatchesReferenceValues) {
  Reference ref;
  const Tensor pr = ref.d.p_benign(ref.real);
  const Tensor pf = ref.d.p_benign(ref.g.generate(ref.z));
  const Tensor pp = ref.proxy.p_benign(ref.g.generate(ref.z));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(pr[i], kPReal[i], 1e-12);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(pf[i], kPFake[i], 1e-12);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(pp[i], kPProxy[i], 1e-12);
}

TEST(Discriminator, ZeroParametersGiveHalf) {
  Discriminator d = Discriminator::zeros(200);
  const Tensor p = d.p_benign(test::cos_inputs(5, 200));
  for (double x : p.data()) EXPECT_EQ(x, 0.5);
  const Tensor f = d.features(test::cos_inputs(5, 200));
  EXPECT_EQ(f.rows(), 5);
  EXPECT_EQ(f.cols(), 50);
  EXPECT_THROW(d.p_benign(Tensor(1, 199)), ShapeError);
}

TEST(Discriminator, SoftmaxComponentsSumToOne) {
  SeededRng rng(4);
  Discriminator d = Discriminator::random(6, rng, 8, 5);
  Discriminator swapped = d;
  for (const char* name : {"D.W3", "D.b3"}) {
    Tensor& t = swapped.params().value(name);
    for (Index r = 0; r < t.rows(); ++r) std::swap(t(r, 0), t(r, 1));
  }
  const Tensor x = test::cos_inputs(10, 6, 0.3, 2.0);
  const Tensor p = d.p_benign(x);
  const Tensor q = swapped.p_benign(x);
  for (Index i = 0; i < 10; ++i) EXPECT_NEAR(p[i] + q[i], 1.0, 1e-9);
}

TEST(Discriminator, TapeAndValuePathsAgree) {
  SeededRng rng(5);
  Discriminator d = Discriminator::random(6, rng, 8, 5);
  const Tensor x = test::cos_inputs(7, 6);
  Tape tape;
  DiscriminatorOutput out = d.forward(tape, tape.constant(x), false);
  const Tensor p = d.p_benign(x);
  const Tensor f = d.features(x);
  for (Index i = 0; i < 7; ++i) EXPECT_NEAR(out.p_benign.value()(i, 0), p[i], 1e-15);
  for (Index k = 0; k < f.size(); ++k) EXPECT_NEAR(out.features.value().data()[k], f[k], 1e-15);
}

TEST(Losses, MatchReferenceValues) {
  Reference ref;
  Tape t;
  Var fake = ref.g.forward(t, t.constant(ref.z), false);
  DiscriminatorOutput real = ref.d.forward(t, t.constant(ref.real), false);
  DiscriminatorOutput gen = ref.d.forward(t, fake, false);
  DiscriminatorOutput prox = ref.proxy.forward(t, fake, false);

  EXPECT_NEAR(regular_d_loss(real.p_benign, gen.p_benign).scalar(), kRegularD, 1e-12);
  EXPECT_NEAR(regular_g_loss(gen.p_benign).scalar(), kRegularG, 1e-12);
  EXPECT_NEAR(non_saturating_g_loss(gen.p_benign).scalar(), kNonSaturatingG, 1e-12);
  EXPECT_NEAR(ocan_d_loss(real.p_benign, gen.p_benign).scalar(), kOcanD, 1e-12);
  EXPECT_NEAR(pull_away_term(gen.features).scalar(), kPullAway, 1e-12);
  EXPECT_NEAR(feature_matching_loss(gen.features, real.features).scalar(), kFeatureMatching, 1e-12);

  const std::vector<double> pp = prox.p_benign.tensor().to_vector();
  const double eps = fit_density_threshold(pp, 2);
  EXPECT_NEAR(eps, kDensityEps, 1e-12);
  EXPECT_NEAR(density_term(prox.p_benign, eps).scalar(), kDensityTerm, 1e-12);
  EXPECT_NEAR(complementary_g_loss(gen.features, real.features, prox.p_benign, eps).scalar(), kComplementaryG,
              1e-12);
}

TEST(Losses, RegularHandValues) {
  Tape t;
  Var half = t.constant(Tensor(8, 1, 0.5));
  EXPECT_NEAR(regular_d_loss(half, half).scalar(), -1.3863, 1e-4);
  EXPECT_NEAR(regular_g_loss(half).scalar(), -0.6931, 1e-4);
  const double best = regular_d_loss(t.constant(Tensor(4, 1, 1.0)), t.constant(Tensor(4, 1, 0.0))).scalar();
  EXPECT_LE(best, 0.0);
  EXPECT_GT(best, -1e-6);
  EXPECT_NEAR(regular_g_loss(t.constant(Tensor(4, 1, 1.0))).scalar(), std::log(1e-7), 1e-6);
}

TEST(Losses, OcanHandValues) {
  Tape t;
  Var half = t.constant(Tensor(8, 1, 0.5));
  EXPECT_NEAR(ocan_d_loss(half, half).scalar(), -1.7329, 1e-4);
  const double best = ocan_d_loss(t.constant(Tensor(4, 1, 1.0)), t.constant(Tensor(4, 1, 0.0))).scalar();
  EXPECT_GT(best, -1e-6);
}

TEST(Losses, OcanWithoutEntropyIsRegular) {
  SeededRng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pr = random_probs(rng, 9);
    const auto pf = random_probs(rng, 7);
    Tape t;
    Var a = column(t, pr), b = column(t, pf);
    double entropy = 0.0;
    for (double p : pr) entropy += oracle::clampp(p) * std::log(oracle::clampp(p));
    entropy /= 9.0;
    EXPECT_NEAR(ocan_d_loss(a, b).scalar() - entropy, regular_d_loss(a, b).scalar(), 1e-15);
  }
}

TEST(Losses, EmptyBatchesThrow) {
  Tape t;
  Var empty = t.constant(Tensor(0, 1));
  Var one = t.constant(Tensor(1, 1, 0.5));
  EXPECT_THROW(regular_d_loss(empty, one), ArgumentError);
  EXPECT_THROW(regular_d_loss(one, empty), ArgumentError);
  EXPECT_THROW(regular_g_loss(empty), ArgumentError);
  EXPECT_THROW(ocan_d_loss(empty, one), ArgumentError);
  EXPECT_THROW(feature_matching_loss(t.constant(Tensor(0, 3)), t.constant(Tensor(2, 3))), ArgumentError);
  EXPECT_THROW(pull_away_term(t.constant(Tensor(1, 3, 1.0))), ArgumentError);
  EXPECT_THROW(density_term(empty, 0.5), ArgumentError);
}

TEST(PullAway, HandValues) {
  Tape t;
  EXPECT_NEAR(pull_away_term(t.constant(Tensor::from_rows({{1, 0}, {0, 1}}))).scalar(), 0.0, 1e-15);
  EXPECT_NEAR(pull_away_term(t.constant(Tensor::from_rows({{0.3, -2}, {0.3, -2}}))).scalar(), 1.0, 1e-12);
  EXPECT_NEAR(pull_away_term(t.constant(Tensor::from_rows({{1, 0}, {1, 0}, {0, 1}}))).scalar(), 1.0 / 3.0, 1e-12);
}

TEST(PullAway, ZeroNormRowIsFinite) {
  Tape t;
  const double v = pull_away_term(t.constant(Tensor::from_rows({{0, 0}, {1, 0}, {1, 0}}))).scalar();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 2.0 / 6.0, 1e-12);
}

TEST(PullAway, InvariantToRowRescaling) {
  SeededRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::Rows f = random_rows(rng, 6, 5);
    Tape t;
    const double base = pull_away_term(rows_var(t, f)).scalar();
    for (auto& row : f) {
      const double s = rng.uniform(0.01, 100.0);
      for (auto& x : row) x *= s;
    }
    EXPECT_NEAR(pull_away_term(rows_var(t, f)).scalar(), base, 1e-9);
  }
}

TEST(FeatureMatching, HandValues) {
  Tape t;
  Var a = t.constant(Tensor::from_rows({{1, 2, 3}, {3, 2, 1}}));
  EXPECT_EQ(feature_matching_loss(a, a).scalar(), 0.0);
  Var b = t.constant(Tensor::from_rows({{2, 2, 2}, {2, 3, 2}, {2, 1, 2}}));
  EXPECT_NEAR(feature_matching_loss(a, b).scalar(), 0.0, 1e-15);
  Var c = t.constant(Tensor::from_rows({{2, 2, 2}, {2, 2, 2}}));
  Var d = t.constant(Tensor::from_rows({{2, 3, 2}}));
  EXPECT_NEAR(feature_matching_loss(c, d).scalar(), 1.0, 1e-15);
  EXPECT_THROW(feature_matching_loss(c, t.constant(Tensor(2, 2))), ShapeError);
}

TEST(DensityThreshold, QuantileRule) {
  const std::vector<double> p = {0.7, 0.3, 1.0, 0.1, 0.5, 0.9, 0.2, 0.8, 0.4, 0.6};
  EXPECT_DOUBLE_EQ(fit_density_threshold(p, 5), 0.2);
  EXPECT_DOUBLE_EQ(fit_density_threshold(p, 10), 0.1);
  EXPECT_DOUBLE_EQ(fit_density_threshold(p, 3), 0.4);  // index ceil(10/3) - 1 = 3
  const std::vector<double> same(7, 0.42);
  EXPECT_EQ(fit_density_threshold(same, 5), 0.42);
  EXPECT_THROW(fit_density_threshold(std::vector<double>{}, 5), ArgumentError);
  EXPECT_THROW(fit_density_threshold(p, 1), ArgumentError);
}

TEST(DensityTerm, AllBelowThresholdContributesZero) {
  SeededRng rng(8);
  const oracle::Rows gen = random_rows(rng, 5, 4);
  const oracle::Rows real = random_rows(rng, 6, 4);
  Tape t;
  Var p = column(t, {0.1, 0.2, 0.3, 0.05, 0.3});
  EXPECT_EQ(density_term(p, 0.3).scalar(), 0.0);
  Var gf = rows_var(t, gen), rf = rows_var(t, real);
  EXPECT_EQ(complementary_g_loss(gf, rf, p, 0.3).scalar(),
            add(pull_away_term(gf), feature_matching_loss(gf, rf)).scalar());
}

TEST(DensityTerm, MaskIgnoresSmallPerturbationsBelowThreshold) {
  SeededRng rng(9);
  Discriminator proxy = Discriminator::random(4, rng, 8, 5);
  const Tensor x = test::cos_inputs(16, 4, 0.1, 2.0);
  const Tensor p = proxy.p_benign(x);
  const double eps = fit_density_threshold(p.data(), 2);
  Tensor moved = x;
  for (Index k = 0; k < moved.size(); ++k) moved[k] += 1e-9 * std::sin(static_cast<double>(k));
  const Tensor q = proxy.p_benign(moved);
  const Matrix before = density_mask(p.matrix(), eps);
  const Matrix after = density_mask(q.matrix(), eps);
  for (Index i = 0; i < 16; ++i) {
    if (p[i] < eps - 1e-3) EXPECT_EQ(after(i, 0), 0.0);
    if (p[i] < eps - 1e-3) EXPECT_EQ(before(i, 0), 0.0);
  }
}

TEST(Losses, AgreeWithLoopOraclesOnRandomCases) {
  SeededRng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(15), m = 2 + rng.below(15), w = 1 + rng.below(8);
    const auto pr = random_probs(rng, n);
    const auto pf = random_probs(rng, m);
    const oracle::Rows gen = random_rows(rng, m, w);
    const oracle::Rows real = random_rows(rng, n, w);
    const double eps = rng.uniform(0.05, 0.95);
    Tape t;
    Var a = column(t, pr), b = column(t, pf), gf = rows_var(t, gen), rf = rows_var(t, real);
    ASSERT_NEAR(regular_d_loss(a, b).scalar(), oracle::regular_d(pr, pf), 1e-10);
    ASSERT_NEAR(regular_g_loss(b).scalar(), oracle::regular_g(pf), 1e-10);
    ASSERT_NEAR(ocan_d_loss(a, b).scalar(), oracle::ocan_d(pr, pf), 1e-10);
    ASSERT_NEAR(pull_away_term(gf).scalar(), oracle::pull_away(gen), 1e-10);
    ASSERT_NEAR(feature_matching_loss(gf, rf).scalar(), oracle::feature_matching(gen, real), 1e-10);
    ASSERT_NEAR(complementary_g_loss(gf, rf, b, eps).scalar(),
                oracle::pull_away(gen) + oracle::density(pf, eps) + oracle::feature_matching(gen, real), 1e-10);
  }
}

TEST(Gradients, DiscriminatorLossesPassFiniteDifferences) {
  SeededRng rng(11);
  Discriminator d = Discriminator::random(6, rng, 10, 5);
  const Tensor real = test::cos_inputs(8, 6, 0.1, 1.2);
  const Tensor fake = test::cos_inputs(8, 6, 2.3, 0.9);
  for (bool ocan : {false, true}) {
    LossBuilder fn = [&](Tape& t, ParamGroup&) {
      Var pr = d.forward(t, t.constant(real), true).p_benign;
      Var pf = d.forward(t, t.constant(fake), true).p_benign;
      return ocan ? ocan_d_loss(pr, pf) : regular_d_loss(pr, pf);
    };
    GradCheckReport r = finite_diff_check(fn, d.params());
    EXPECT_TRUE(r.passed) << ocan << " " << r.worst_parameter << " " << r.max_relative_error;
  }
}

TEST(Gradients, GeneratorLossesPassFiniteDifferences) {
  SeededRng rng(12);
  Generator g = Generator::random(6, rng, 4, 10);
  Discriminator d = Discriminator::random(6, rng, 10, 5);
  Discriminator proxy = Discriminator::random(6, rng, 10, 5);
  SeededRng nrng(13);
  const Tensor z = sample_noise(nrng, 8, 4);
  const Tensor real = test::cos_inputs(8, 6, 0.1, 1.2);
  // Midway between two proxy scores so a finite-difference step cannot flip the indicator.
  const double eps = test::gap_threshold(proxy.p_benign(g.generate(z)));
  for (int which = 0; which < 4; ++which) {
    LossBuilder fn = [&](Tape& t, ParamGroup&) {
      Var fake = g.forward(t, t.constant(z), true);
      DiscriminatorOutput out = d.forward(t, fake, false);
      switch (which) {
        case 0: return regular_g_loss(out.p_benign);
        case 1: return non_saturating_g_loss(out.p_benign);
        case 2: return pull_away_term(out.features);
        default: {
          DiscriminatorOutput r = d.forward(t, t.constant(real), false);
          return complementary_g_loss(out.features, r.features, proxy.forward(t, fake, false).p_benign, eps);
        }
      }
    };
    GradCheckReport r = finite_diff_check(fn, g.params());
    EXPECT_TRUE(r.passed) << which << " " << r.worst_parameter << " " << r.max_relative_error;
  }
}

Tensor small_representations(std::uint64_t seed) {
  SeededRng rng(seed);
  Tensor reps(96, 6);
  for (Index i = 0; i < reps.rows(); ++i) {
    for (Index j = 0; j < 6; ++j) reps(i, j) = std::tanh(0.5 * static_cast<double>(j % 3) - 0.4 + 0.2 * rng.uniform(-1, 1));
  }
  return reps;
}

GanConfig small_config() {
  GanConfig cfg;
  cfg.epochs = 3;
  cfg.noise_dim = 4;
  cfg.gen_hidden = 8;
  cfg.disc_hidden = 8;
  cfg.features = 5;
  cfg.seed = 14;
  return cfg;
}

TEST(Training, RegularGanIsDeterministic) {
  const Tensor reps = small_representations(15);
  GanResult a = train_regular_gan(reps, small_config());
  GanResult b = train_regular_gan(reps, small_config());
  EXPECT_TRUE(a.generator.params().same_values(b.generator.params()));
  EXPECT_TRUE(a.discriminator.params().same_values(b.discriminator.params()));
  ASSERT_EQ(a.log.size(), 3u);
}

TEST(Training, OcanIsDeterministicAndCallsBackEveryEpoch) {
  const Tensor reps = small_representations(16);
  int calls = 0;
  OcanNets a = train_ocan(reps, small_config(), [&](int, const Generator&, const Discriminator&) { ++calls; });
  OcanNets b = train_ocan(reps, small_config());
  EXPECT_EQ(calls, 3);
  EXPECT_TRUE(a.complementary.discriminator.params().same_values(b.complementary.discriminator.params()));
  EXPECT_EQ(a.proxy.epsilon, b.proxy.epsilon);
  EXPECT_GT(a.proxy.epsilon, 0.0);
  EXPECT_LT(a.proxy.epsilon, 1.0);
  EXPECT_TRUE(a.proxy.discriminator.params().same_values(a.regular.discriminator.params()));
}

TEST(Training, ProxyRunsOnItsOwnSeedStream) {
  GanConfig cfg = small_config();
  EXPECT_NE(proxy_config(cfg).seed, cfg.seed);
  EXPECT_EQ(proxy_config(cfg).epochs, cfg.epochs);
}

TEST(Config, ValidateRejectsBadValues) {
  GanConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.quantile_k = 1;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = GanConfig{};
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = GanConfig{};
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  EXPECT_THROW(train_regular_gan(Tensor(0, 4), GanConfig{}), ArgumentError);
}

TEST(Config, GeneratorObjectiveNames) {
  EXPECT_EQ(generator_objective_from_string("saturating"), GeneratorObjective::kSaturating);
  EXPECT_EQ(to_string(GeneratorObjective::kNonSaturating), "non-saturating");
  EXPECT_THROW(generator_objective_from_string("wasserstein"), ArgumentError);
}

}  // namespace
}  // namespace ocan
