#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ocan/optim.hpp"
#include "ocan/params.hpp"
#include "ocan/rng.hpp"
#include "ocan/tape.hpp"

namespace ocan {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;
inline constexpr double kNormFloor = 1e-12;

// noise -> relu(hidden) -> tanh(output). Output width is the representation width.
class Generator {
 public:
  static Generator random(Index output, SeededRng& rng, Index noise = 50, Index hidden = 100);
  static Generator zeros(Index output, Index noise = 50, Index hidden = 100);
  static Generator from_params(ParamGroup params);

  Index noise_width() const { return params_.value("G.W1").rows(); }
  Index output_width() const { return params_.value("G.W2").cols(); }
  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }

  Var forward(Tape& tape, Var z, bool trainable);
  Tensor generate(const Tensor& z) const;

 private:
  explicit Generator(ParamGroup params) : params_(std::move(params)) {}
  ParamGroup params_;
};

struct DiscriminatorOutput {
  Var p_benign;  // B×1, softmax component 0
  Var features;  // B×feature width, the second relu layer
};

// input -> relu(100) -> relu(50) = f(·) -> softmax(2).
class Discriminator {
 public:
  static Discriminator random(Index input, SeededRng& rng, Index hidden = 100, Index features = 50);
  static Discriminator zeros(Index input, Index hidden = 100, Index features = 50);
  static Discriminator from_params(ParamGroup params);

  Index input_width() const { return params_.value("D.W1").rows(); }
  Index feature_width() const { return params_.value("D.W2").cols(); }
  ParamGroup& params() { return params_; }
  const ParamGroup& params() const { return params_; }

  DiscriminatorOutput forward(Tape& tape, Var v, bool trainable);
  // Value-level pass; every scoring path goes through here.
  Tensor p_benign(const Tensor& v) const;
  Tensor features(const Tensor& v) const;

 private:
  explicit Discriminator(ParamGroup params) : params_(std::move(params)) {}
  void check_input(Index cols) const;
  ParamGroup params_;
};

// Losses. D objectives are to be maximised, G losses minimised.
Var regular_d_loss(Var p_real, Var p_fake);
Var regular_g_loss(Var p_fake);
// -mean log D(G(z)): same fixed point as regular_g_loss, but its gradient
// does not vanish while the discriminator rejects every fake.
Var non_saturating_g_loss(Var p_fake);
Var pull_away_term(Var features);
Var feature_matching_loss(Var gen_features, Var real_features);
// 1 where p > epsilon, else 0; B×1, carries no gradient.
Matrix density_mask(const Matrix& p_proxy, double epsilon);
Var density_term(Var p_proxy, double epsilon);
Var complementary_g_loss(Var gen_features, Var real_features, Var p_proxy_gen, double epsilon);
Var ocan_d_loss(Var p_real, Var p_gen);

// Value at index ceil(N/k) - 1 of the ascending sort.
double fit_density_threshold(std::span<const double> p_benign, int k);
double fit_density_threshold(const Discriminator& proxy, const Tensor& representations, int k);

struct DensityProxy {
  Discriminator discriminator;
  double epsilon = 0.0;
};

// Generator objective of the regular GAN (the density proxy and OCAN-r).
enum class GeneratorObjective { kSaturating, kNonSaturating };
std::string to_string(GeneratorObjective o);
GeneratorObjective generator_objective_from_string(const std::string& s);

struct GanConfig {
  int epochs = 50;
  std::size_t batch_size = 32;
  Index noise_dim = 50;
  Index gen_hidden = 100;
  Index disc_hidden = 100;
  Index features = 50;
  int quantile_k = 5;
  GeneratorObjective regular_objective = GeneratorObjective::kNonSaturating;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
};

struct GanEpochStats {
  int epoch = 0;
  double d_objective = 0.0;  // mean over minibatches
  double g_loss = 0.0;
  double mean_p_real = 0.0;
  double mean_p_fake = 0.0;
};

struct GanResult {
  Generator generator;
  Discriminator discriminator;
  std::vector<GanEpochStats> log;
};

// Called after every epoch with the current networks.
using GanEpochCallback = std::function<void(int epoch, const Generator&, const Discriminator&)>;

GanResult train_regular_gan(const Tensor& representations, const GanConfig& config,
                            const GanEpochCallback& on_epoch = {});
GanResult train_complementary_gan(const Tensor& representations, const DensityProxy& proxy,
                                  const GanConfig& config, const GanEpochCallback& on_epoch = {});

// The regular GAN inside train_ocan runs on its own seed stream.
GanConfig proxy_config(const GanConfig& config);

// Regular GAN -> epsilon -> complementary GAN.
struct OcanNets {
  DensityProxy proxy;
  GanResult regular;
  GanResult complementary;
};
OcanNets train_ocan(const Tensor& representations, const GanConfig& config,
                    const GanEpochCallback& on_complementary_epoch = {});

}  // namespace ocan
