#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dynae/matrix.hpp"
#include "dynae/mlp.hpp"
#include "dynae/optim.hpp"
#include "dynae/rng.hpp"

namespace dynae {

inline constexpr std::size_t kLatentDim = 10;

/// Encoder d-500-500-2000-10 and decoder 10-2000-500-500-d. The bottleneck and the
/// reconstruction layer are linear, every other layer is ReLU.
struct AutoencoderModel {
    Mlp encoder;
    Mlp decoder;

    std::size_t input_dim() const { return encoder.input_size(); }
    std::size_t latent_dim() const { return encoder.output_size(); }
};

/// d-500-500-2000-1 with ReLU hidden layers and a linear scalar head.
struct CriticModel {
    Mlp net;
};

AutoencoderModel make_autoencoder(std::size_t d, Rng& rng);
CriticModel make_critic(std::size_t d, Rng& rng);

/// Arbitrary widths for tests and toy runs: encoder widths {d, ..., p}, decoder
/// widths {p, ..., d}. Hidden layers ReLU, last layer of each linear.
AutoencoderModel make_autoencoder(std::span<const std::size_t> encoder_widths,
                                  std::span<const std::size_t> decoder_widths, Rng& rng);
CriticModel make_critic(std::span<const std::size_t> widths, Rng& rng);

/// Standard widths for input dimension d.
std::vector<std::size_t> encoder_widths(std::size_t d);
std::vector<std::size_t> decoder_widths(std::size_t d);
std::vector<std::size_t> critic_widths(std::size_t d);

Matrix encode(const AutoencoderModel& model, const Matrix& X);
Matrix decode(const AutoencoderModel& model, const Matrix& Z);
/// Encodes in chunks to bound memory on full-dataset passes.
Matrix encode_all(const AutoencoderModel& model, const Matrix& X, std::size_t chunk = 1024);

/// alpha * z1 + (1 - alpha) * z2, alpha in [0,1].
Matrix interpolate_latent(const Matrix& z1, const Matrix& z2, double alpha);

/// Random quantities of one adversarial-interpolation step: in-batch partners,
/// interpolation coefficients (one per pair) and mixing coefficients for the
/// critic's realism term (one per sample).
struct AcaiSample {
    std::vector<std::size_t> partner;
    std::vector<double> alpha;
    std::vector<double> gamma;
};

/// alpha, gamma ~ U[0, alpha_max] and U[0,1]; partner is a random permutation (self-pairs allowed).
AcaiSample draw_acai_sample(std::size_t batch, Rng& rng, double alpha_max = 1.0);

struct AutoencoderGrads {
    MlpGrads encoder;
    MlpGrads decoder;
};

struct AcaiAutoencoderLoss {
    double value = 0.0;
    double reconstruction = 0.0;
    double critic_term = 0.0;  // mean over the batch of c(x_alpha)^2
    AutoencoderGrads grads;
    MlpGrads critic_grads;     // always zero: the critic is a constant here
};

struct AcaiCriticLoss {
    double value = 0.0;
    double alpha_term = 0.0;    // mean (c(x_alpha) - alpha)^2
    double realism_term = 0.0;  // mean c(gamma x + (1-gamma) x_hat)^2
    MlpGrads grads;
    AutoencoderGrads autoencoder_grads;  // always zero
};

/// ||x - x_hat||^2 + lambda ||c(x_alpha)||^2 averaged over the batch, with
/// x_alpha = g(alpha f(x1) + (1 - alpha) f(x2)). Gradients for encoder and decoder only.
/// The target overloads feed x (e.g. augmented) to the network and score against target (clean).
AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          const AcaiSample& sample, double lambda);
AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          const Matrix& target, const AcaiSample& sample, double lambda);
AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          Rng& rng, double lambda, double alpha_max = 1.0);

/// ||c(x_alpha) - alpha||^2 + ||c(gamma x + (1 - gamma) x_hat)||^2 averaged over the batch.
/// Gradients for the critic only.
AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                const AcaiSample& sample);
AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                const Matrix& target, const AcaiSample& sample);
AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x, Rng& rng,
                                double alpha_max = 1.0);

/// Both losses from one shared forward pass (what a pretraining step uses).
struct AcaiLosses {
    AcaiAutoencoderLoss autoencoder;
    AcaiCriticLoss critic;
};
AcaiLosses acai_losses(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                       const AcaiSample& sample, double lambda);
AcaiLosses acai_losses(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x, const Matrix& target,
                       const AcaiSample& sample, double lambda);

/// Encoder parameters followed by decoder parameters.
std::vector<double> flatten_params(const AutoencoderModel& model);
void assign_params(AutoencoderModel& model, std::span<const double> flat);
std::vector<double> flatten_grads(const AutoencoderGrads& g);

}  // namespace dynae
