#include "ocan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "ocan/batching.hpp"
#include "ocan/errors.hpp"

namespace ocan {

namespace {

void require_shape(const ParamGroup& g, const char* name, Index rows, Index cols) {
  const Tensor& t = g.value(name);
  if (t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string(name) + " has shape " + t.shape_str() + ", expected " +
                     shape_str(rows, cols));
  }
}

Var bind(Tape& tape, ParamGroup& g, const char* name, bool trainable) {
  return trainable ? tape.param(g, name) : tape.constant(g.value(name));
}

Var affine(Tape& tape, ParamGroup& g, Var x, const char* w, const char* b, bool trainable) {
  return add(matmul(x, bind(tape, g, w, trainable)), bind(tape, g, b, trainable));
}

Matrix dense(const Matrix& x, const ParamGroup& g, const char* w, const char* b) {
  Matrix y = x * g.value(w).matrix();
  y.rowwise() += g.value(b).matrix().row(0);
  return y;
}

void require_batch(Var a, const char* what) {
  if (a.rows() == 0) throw ArgumentError(std::string(what) + ": empty batch");
}

Var clamp_prob(Var p) { return clamp(p, kProbFloor, 1.0 - kProbFloor); }

Tensor rows_of(const Tensor& data, std::span<const std::size_t> idx) {
  Tensor out(static_cast<Index>(idx.size()), data.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.matrix().row(static_cast<Index>(k)) = data.matrix().row(static_cast<Index>(idx[k]));
  }
  return out;
}

void check_finite(double value, const char* phase, const char* what, int epoch, std::size_t batch) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(phase) + " diverged: " + what + " is " + std::to_string(value) +
                       " at epoch " + std::to_string(epoch) + ", minibatch " + std::to_string(batch));
  }
}

// Shared loop: one D step then one G step per minibatch of real representations.
struct GanLosses {
  std::function<Var(Tape&, Discriminator&, Var real, Var fake)> d_objective;
  std::function<Var(Tape&, Discriminator&, Var real, Var fake)> g_loss;
};

GanResult run_gan(const Tensor& reps, const GanConfig& config, const GanLosses& losses,
                  const char* phase, const GanEpochCallback& on_epoch) {
  config.validate();
  if (reps.rows() == 0) throw ArgumentError(std::string(phase) + ": empty representation set");
  if (!reps.all_finite()) throw NumericError(std::string(phase) + ": non-finite representation");
  SeededRng init_rng(mix_seed(config.seed, 1));
  GanResult result{Generator::random(reps.cols(), init_rng, config.noise_dim, config.gen_hidden),
                   Discriminator::random(reps.cols(), init_rng, config.disc_hidden, config.features),
                   {}};
  Generator& gen = result.generator;
  Discriminator& disc = result.discriminator;
  AdamState g_opt(gen.params(), config.adam);
  AdamState d_opt(disc.params(), config.adam);
  SeededRng noise_rng(mix_seed(config.seed, 2));
  const Index fakes = static_cast<Index>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    GanEpochStats stats;
    stats.epoch = epoch;
    const auto batches = minibatch_indices(static_cast<std::size_t>(reps.rows()), config.batch_size,
                                           mix_seed(config.seed, 100 + static_cast<std::uint64_t>(epoch)));
    std::size_t b = 0;
    try {
      for (; b < batches.size(); ++b) {
        const Tensor real = rows_of(reps, batches[b]);
        {
          Tape tape;
          disc.params().zero_grad();
          Var fake = gen.forward(tape, tape.constant(sample_noise(noise_rng, fakes, config.noise_dim)), false);
          Var objective = losses.d_objective(tape, disc, tape.constant(real), fake);
          check_finite(objective.scalar(), phase, "discriminator objective", epoch, b);
          tape.backward(scale(objective, -1.0));
          d_opt.apply(disc.params());
          stats.d_objective += objective.scalar();
        }
        {
          Tape tape;
          gen.params().zero_grad();
          Var fake = gen.forward(tape, tape.constant(sample_noise(noise_rng, fakes, config.noise_dim)), true);
          Var loss = losses.g_loss(tape, disc, tape.constant(real), fake);
          check_finite(loss.scalar(), phase, "generator loss", epoch, b);
          tape.backward(loss);
          g_opt.apply(gen.params());
          stats.g_loss += loss.scalar();
          stats.mean_p_fake += disc.p_benign(fake.tensor()).matrix().mean();
        }
        stats.mean_p_real += disc.p_benign(real).matrix().mean();
      }
    } catch (const NumericError& e) {
      const std::string msg = e.what();
      if (msg.find("diverged") != std::string::npos) throw;
      throw NumericError(std::string(phase) + " diverged at epoch " + std::to_string(epoch) +
                         ", minibatch " + std::to_string(b) + ": " + msg);
    }
    const double n = static_cast<double>(batches.size());
    stats.d_objective /= n;
    stats.g_loss /= n;
    stats.mean_p_real /= n;
    stats.mean_p_fake /= n;
    result.log.push_back(stats);
    if (on_epoch) on_epoch(epoch, gen, disc);
  }
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generator

Generator Generator::random(Index output, SeededRng& rng, Index noise, Index hidden) {
  if (output <= 0 || noise <= 0 || hidden <= 0) throw ArgumentError("generator widths must be positive");
  ParamGroup g;
  g.add("G.W1", init_weight(rng, noise, hidden));
  g.add("G.b1", Tensor(1, hidden));
  g.add("G.W2", init_weight(rng, hidden, output));
  g.add("G.b2", Tensor(1, output));
  return Generator(std::move(g));
}

Generator Generator::zeros(Index output, Index noise, Index hidden) {
  if (output <= 0 || noise <= 0 || hidden <= 0) throw ArgumentError("generator widths must be positive");
  ParamGroup g;
  g.add("G.W1", Tensor(noise, hidden));
  g.add("G.b1", Tensor(1, hidden));
  g.add("G.W2", Tensor(hidden, output));
  g.add("G.b2", Tensor(1, output));
  return Generator(std::move(g));
}

Generator Generator::from_params(ParamGroup params) {
  const Tensor& w1 = params.value("G.W1");
  const Tensor& w2 = params.value("G.W2");
  require_shape(params, "G.b1", 1, w1.cols());
  require_shape(params, "G.W2", w1.cols(), w2.cols());
  require_shape(params, "G.b2", 1, w2.cols());
  return Generator(std::move(params));
}

Var Generator::forward(Tape& tape, Var z, bool trainable) {
  if (z.cols() != noise_width()) {
    throw ShapeError("generator noise has width " + std::to_string(z.cols()) + ", expected " +
                     std::to_string(noise_width()));
  }
  Var h = relu(affine(tape, params_, z, "G.W1", "G.b1", trainable));
  return tanh(affine(tape, params_, h, "G.W2", "G.b2", trainable));
}

Tensor Generator::generate(const Tensor& z) const {
  if (z.cols() != noise_width()) {
    throw ShapeError("generator noise has width " + std::to_string(z.cols()) + ", expected " +
                     std::to_string(noise_width()));
  }
  Matrix h = dense(z.matrix(), params_, "G.W1", "G.b1").cwiseMax(0.0);
  return Tensor(Matrix(dense(h, params_, "G.W2", "G.b2").array().tanh()));
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator Discriminator::random(Index input, SeededRng& rng, Index hidden, Index features) {
  if (input <= 0 || hidden <= 0 || features <= 0) {
    throw ArgumentError("discriminator widths must be positive");
  }
  ParamGroup g;
  g.add("D.W1", init_weight(rng, input, hidden));
  g.add("D.b1", Tensor(1, hidden));
  g.add("D.W2", init_weight(rng, hidden, features));
  g.add("D.b2", Tensor(1, features));
  g.add("D.W3", init_weight(rng, features, 2));
  g.add("D.b3", Tensor(1, 2));
  return Discriminator(std::move(g));
}

Discriminator Discriminator::zeros(Index input, Index hidden, Index features) {
  if (input <= 0 || hidden <= 0 || features <= 0) {
    throw ArgumentError("discriminator widths must be positive");
  }
  ParamGroup g;
  g.add("D.W1", Tensor(input, hidden));
  g.add("D.b1", Tensor(1, hidden));
  g.add("D.W2", Tensor(hidden, features));
  g.add("D.b2", Tensor(1, features));
  g.add("D.W3", Tensor(features, 2));
  g.add("D.b3", Tensor(1, 2));
  return Discriminator(std::move(g));
}

Discriminator Discriminator::from_params(ParamGroup params) {
  const Tensor& w1 = params.value("D.W1");
  const Tensor& w2 = params.value("D.W2");
  require_shape(params, "D.b1", 1, w1.cols());
  require_shape(params, "D.W2", w1.cols(), w2.cols());
  require_shape(params, "D.b2", 1, w2.cols());
  require_shape(params, "D.W3", w2.cols(), 2);
  require_shape(params, "D.b3", 1, 2);
  return Discriminator(std::move(params));
}

void Discriminator::check_input(Index cols) const {
  if (cols != input_width()) {
    throw ShapeError("discriminator input has width " + std::to_string(cols) + ", expected " +
                     std::to_string(input_width()));
  }
}

DiscriminatorOutput Discriminator::forward(Tape& tape, Var v, bool trainable) {
  check_input(v.cols());
  Var h = relu(affine(tape, params_, v, "D.W1", "D.b1", trainable));
  Var f = relu(affine(tape, params_, h, "D.W2", "D.b2", trainable));
  Var p = row_softmax(affine(tape, params_, f, "D.W3", "D.b3", trainable));
  return {slice_cols(p, 0, 1), f};
}

Tensor Discriminator::features(const Tensor& v) const {
  check_input(v.cols());
  Matrix h = dense(v.matrix(), params_, "D.W1", "D.b1").cwiseMax(0.0);
  return Tensor(Matrix(dense(h, params_, "D.W2", "D.b2").cwiseMax(0.0)));
}

Tensor Discriminator::p_benign(const Tensor& v) const {
  const Matrix logits = dense(features(v).matrix(), params_, "D.W3", "D.b3");
  Tensor out(logits.rows(), 1);
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = std::max(logits(i, 0), logits(i, 1));
    const double e0 = std::exp(logits(i, 0) - m);
    const double e1 = std::exp(logits(i, 1) - m);
    out(i, 0) = e0 / (e0 + e1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses

Var regular_d_loss(Var p_real, Var p_fake) {
  require_batch(p_real, "regular_d_loss");
  require_batch(p_fake, "regular_d_loss");
  Var fake = clamp_prob(p_fake);
  return add(mean(log(clamp_prob(p_real))), mean(log(add_scalar(scale(fake, -1.0), 1.0))));
}

Var regular_g_loss(Var p_fake) {
  require_batch(p_fake, "regular_g_loss");
  return mean(log(add_scalar(scale(clamp_prob(p_fake), -1.0), 1.0)));
}

Var non_saturating_g_loss(Var p_fake) {
  require_batch(p_fake, "non_saturating_g_loss");
  return scale(mean(log(clamp_prob(p_fake))), -1.0);
}

std::string to_string(GeneratorObjective o) {
  return o == GeneratorObjective::kSaturating ? "saturating" : "non-saturating";
}

GeneratorObjective generator_objective_from_string(const std::string& s) {
  if (s == "saturating") return GeneratorObjective::kSaturating;
  if (s == "non-saturating") return GeneratorObjective::kNonSaturating;
  throw ArgumentError("unknown generator objective '" + s + "' (expected saturating|non-saturating)");
}

Var pull_away_term(Var features) {
  const Index n = features.rows();
  if (n < 2) throw ArgumentError("pull_away_term needs at least 2 rows, got " + std::to_string(n));
  Var unit = div_rows(features, row_l2_norm(features, kNormFloor));
  Var cos = matmul(unit, transpose(unit));
  // Diagonal entries are |unit_i|^2; drop them from the pair sum.
  Var diag = row_sum(square(unit));
  Var off_diag = sub(sum(square(cos)), sum(square(diag)));
  return scale(off_diag, 1.0 / static_cast<double>(n * (n - 1)));
}

Var feature_matching_loss(Var gen_features, Var real_features) {
  require_batch(gen_features, "feature_matching_loss");
  require_batch(real_features, "feature_matching_loss");
  if (gen_features.cols() != real_features.cols()) {
    throw ShapeError("feature_matching_loss: widths " + std::to_string(gen_features.cols()) + " vs " +
                     std::to_string(real_features.cols()));
  }
  return sum(square(sub(col_mean(gen_features), col_mean(real_features))));
}

Matrix density_mask(const Matrix& p_proxy, double epsilon) {
  return (p_proxy.array() > epsilon).cast<double>().matrix();
}

Var density_term(Var p_proxy, double epsilon) {
  require_batch(p_proxy, "density_term");
  Var mask = p_proxy.tape()->constant(density_mask(p_proxy.value(), epsilon));
  return mean(mul(log(clamp_prob(p_proxy)), mask));
}

Var complementary_g_loss(Var gen_features, Var real_features, Var p_proxy_gen, double epsilon) {
  if (p_proxy_gen.rows() != gen_features.rows()) {
    throw ShapeError("complementary_g_loss: " + std::to_string(p_proxy_gen.rows()) +
                     " proxy scores for " + std::to_string(gen_features.rows()) + " samples");
  }
  return add(add(pull_away_term(gen_features), density_term(p_proxy_gen, epsilon)),
             feature_matching_loss(gen_features, real_features));
}

Var ocan_d_loss(Var p_real, Var p_gen) {
  require_batch(p_real, "ocan_d_loss");
  require_batch(p_gen, "ocan_d_loss");
  Var real = clamp_prob(p_real);
  Var entropy = mean(mul(real, log(real)));
  return add(regular_d_loss(p_real, p_gen), entropy);
}

double fit_density_threshold(std::span<const double> p_benign, int k) {
  if (p_benign.empty()) throw ArgumentError("fit_density_threshold: empty probability set");
  if (k < 2) throw ArgumentError("fit_density_threshold: quantile k must be at least 2");
  std::vector<double> sorted(p_benign.begin(), p_benign.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t kk = static_cast<std::size_t>(k);
  return sorted[(n + kk - 1) / kk - 1];
}

double fit_density_threshold(const Discriminator& proxy, const Tensor& representations, int k) {
  if (representations.rows() == 0) throw ArgumentError("fit_density_threshold: empty representation set");
  const Tensor p = proxy.p_benign(representations);
  return fit_density_threshold(p.data(), k);
}

// ---------------------------------------------------------------------------
// Training

void GanConfig::validate() const {
  if (epochs <= 0 || batch_size == 0 || noise_dim <= 0 || gen_hidden <= 0 || disc_hidden <= 0 ||
      features <= 0) {
    throw ArgumentError("GAN epochs, batch size and widths must be positive");
  }
  if (quantile_k < 2) throw ArgumentError("quantile k must be at least 2");
  if (batch_size < 2) throw ArgumentError("GAN batch size must be at least 2 (pull-away term)");
}

GanResult train_regular_gan(const Tensor& representations, const GanConfig& config,
                            const GanEpochCallback& on_epoch) {
  GanLosses losses;
  losses.d_objective = [](Tape& tape, Discriminator& d, Var real, Var fake) {
    return regular_d_loss(d.forward(tape, real, true).p_benign, d.forward(tape, fake, true).p_benign);
  };
  const GeneratorObjective objective = config.regular_objective;
  losses.g_loss = [objective](Tape& tape, Discriminator& d, Var, Var fake) {
    Var p = d.forward(tape, fake, false).p_benign;
    return objective == GeneratorObjective::kSaturating ? regular_g_loss(p) : non_saturating_g_loss(p);
  };
  return run_gan(representations, config, losses, "regular GAN", on_epoch);
}

GanResult train_complementary_gan(const Tensor& representations, const DensityProxy& proxy,
                                  const GanConfig& config, const GanEpochCallback& on_epoch) {
  if (proxy.discriminator.input_width() != representations.cols()) {
    throw ShapeError("density proxy expects width " + std::to_string(proxy.discriminator.input_width()) +
                     ", representations have width " + std::to_string(representations.cols()));
  }
  if (!(proxy.epsilon > 0.0 && proxy.epsilon < 1.0)) {
    throw ArgumentError("density proxy threshold must lie in (0,1), got " + std::to_string(proxy.epsilon));
  }
  // The proxy is bound as constants only, so its weights never change.
  auto frozen = std::make_shared<Discriminator>(proxy.discriminator);
  const double epsilon = proxy.epsilon;
  GanLosses losses;
  losses.d_objective = [](Tape& tape, Discriminator& d, Var real, Var fake) {
    return ocan_d_loss(d.forward(tape, real, true).p_benign, d.forward(tape, fake, true).p_benign);
  };
  losses.g_loss = [frozen, epsilon](Tape& tape, Discriminator& d, Var real, Var fake) {
    Var gen_features = d.forward(tape, fake, false).features;
    Var real_features = d.forward(tape, real, false).features;
    Var p_proxy = frozen->forward(tape, fake, false).p_benign;
    return complementary_g_loss(gen_features, real_features, p_proxy, epsilon);
  };
  return run_gan(representations, config, losses, "complementary GAN", on_epoch);
}

GanConfig proxy_config(const GanConfig& config) {
  GanConfig c = config;
  c.seed = mix_seed(config.seed, 7);
  return c;
}

OcanNets train_ocan(const Tensor& representations, const GanConfig& config,
                    const GanEpochCallback& on_complementary_epoch) {
  GanResult regular = train_regular_gan(representations, proxy_config(config));
  DensityProxy proxy{regular.discriminator,
                     fit_density_threshold(regular.discriminator, representations, config.quantile_k)};
  GanResult comp = train_complementary_gan(representations, proxy, config, on_complementary_epoch);
  return {std::move(proxy), std::move(regular), std::move(comp)};
}

}  // namespace ocan
