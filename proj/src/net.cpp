#include "dynae/net.hpp"

#include <algorithm>
#include <string>

#include "dynae/errors.hpp"
#include "dynae/loss.hpp"

namespace dynae {

namespace {

std::vector<Activation> hidden_relu(std::size_t layers) {
    std::vector<Activation> acts(layers, Activation::relu);
    acts.back() = Activation::linear;
    return acts;
}

Mlp build(std::span<const std::size_t> widths, Rng& rng) {
    if (widths.size() < 2) throw ArgumentError("network needs at least two widths");
    const auto acts = hidden_relu(widths.size() - 1);
    return make_mlp(widths, acts, rng);
}

void check_pairable(const Matrix& x) {
    if (x.rows() < 2) throw ArgumentError("adversarial interpolation needs a batch of at least 2 samples");
}

struct SharedForward {
    ForwardCache enc;
    ForwardCache dec;
    ForwardCache dec_alpha;
    ForwardCache critic_alpha;
};

SharedForward shared_forward(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                             const AcaiSample& s) {
    check_pairable(x);
    const std::size_t b = x.rows();
    if (s.partner.size() != b || s.alpha.size() != b || s.gamma.size() != b)
        throw DimensionError("AcaiSample does not match the batch size");
    SharedForward f;
    f.enc = mlp_forward(model.encoder, x);
    f.dec = mlp_forward(model.decoder, f.enc.output);
    const Matrix& z = f.enc.output;
    Matrix z_alpha(b, z.cols());
    for (std::size_t i = 0; i < b; ++i) {
        auto zi = z.row(i);
        auto zj = z.row(s.partner[i]);
        auto out = z_alpha.row(i);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = s.alpha[i] * zi[c] + (1.0 - s.alpha[i]) * zj[c];
    }
    f.dec_alpha = mlp_forward(model.decoder, z_alpha);
    f.critic_alpha = mlp_forward(critic.net, f.dec_alpha.output);
    return f;
}

AcaiAutoencoderLoss autoencoder_part(const AutoencoderModel& model, const CriticModel& critic, const Matrix& target,
                                     const AcaiSample& s, double lambda, const SharedForward& f) {
    const std::size_t b = target.rows();
    AcaiAutoencoderLoss out;
    const LossValue recon = mse_loss(f.dec.output, target);
    double reg = 0.0;
    for (double c : f.critic_alpha.output.values()) reg += c * c;
    reg /= static_cast<double>(b);
    out.reconstruction = recon.value;
    out.critic_term = reg;
    out.value = recon.value + lambda * reg;
    out.critic_grads = zero_grads(critic.net);

    auto dec_back = mlp_backward(model.decoder, f.dec, recon.grad);
    out.grads.decoder = std::move(dec_back.grads);
    Matrix dz = std::move(dec_back.grad_input);

    if (lambda != 0.0) {
        Matrix dc(b, 1);
        auto c = f.critic_alpha.output.values();
        for (std::size_t i = 0; i < b; ++i) dc(i, 0) = lambda * 2.0 * c[i] / static_cast<double>(b);
        auto crit_back = mlp_backward(critic.net, f.critic_alpha, dc, {.param_grads = false, .input_grad = true});
        auto dec_alpha_back = mlp_backward(model.decoder, f.dec_alpha, crit_back.grad_input);
        accumulate(out.grads.decoder, dec_alpha_back.grads);
        const Matrix& dza = dec_alpha_back.grad_input;
        for (std::size_t i = 0; i < b; ++i) {
            auto g = dza.row(i);
            auto own = dz.row(i);
            auto other = dz.row(s.partner[i]);
            for (std::size_t k = 0; k < g.size(); ++k) {
                own[k] += s.alpha[i] * g[k];
                other[k] += (1.0 - s.alpha[i]) * g[k];
            }
        }
    }
    out.grads.encoder = mlp_backward(model.encoder, f.enc, dz, {.param_grads = true, .input_grad = false}).grads;
    return out;
}

AcaiCriticLoss critic_part(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                           const AcaiSample& s, const SharedForward& f) {
    if (x.rows() != f.dec.output.rows() || x.cols() != f.dec.output.cols())
        throw DimensionError("ACAI target batch does not match the input batch");
    const std::size_t b = x.rows();
    const double inv_b = 1.0 / static_cast<double>(b);
    AcaiCriticLoss out;
    out.autoencoder_grads = {zero_grads(model.encoder), zero_grads(model.decoder)};

    Matrix d_alpha(b, 1);
    double alpha_term = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double r = f.critic_alpha.output(i, 0) - s.alpha[i];
        alpha_term += r * r;
        d_alpha(i, 0) = 2.0 * r * inv_b;
    }
    out.alpha_term = alpha_term * inv_b;

    const Matrix& xhat = f.dec.output;
    Matrix mix(b, x.cols());
    for (std::size_t i = 0; i < b; ++i) {
        auto xi = x.row(i);
        auto hi = xhat.row(i);
        auto m = mix.row(i);
        for (std::size_t k = 0; k < m.size(); ++k) m[k] = s.gamma[i] * xi[k] + (1.0 - s.gamma[i]) * hi[k];
    }
    const auto mix_cache = mlp_forward(critic.net, mix);
    Matrix d_mix(b, 1);
    double realism = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double c = mix_cache.output(i, 0);
        realism += c * c;
        d_mix(i, 0) = 2.0 * c * inv_b;
    }
    out.realism_term = realism * inv_b;
    out.value = out.alpha_term + out.realism_term;

    const BackwardOptions params_only{.param_grads = true, .input_grad = false};
    out.grads = mlp_backward(critic.net, f.critic_alpha, d_alpha, params_only).grads;
    accumulate(out.grads, mlp_backward(critic.net, mix_cache, d_mix, params_only).grads);
    return out;
}

}  // namespace

std::vector<std::size_t> encoder_widths(std::size_t d) { return {d, 500, 500, 2000, kLatentDim}; }
std::vector<std::size_t> decoder_widths(std::size_t d) { return {kLatentDim, 2000, 500, 500, d}; }
std::vector<std::size_t> critic_widths(std::size_t d) { return {d, 500, 500, 2000, 1}; }

AutoencoderModel make_autoencoder(std::size_t d, Rng& rng) {
    return make_autoencoder(encoder_widths(d), decoder_widths(d), rng);
}

CriticModel make_critic(std::size_t d, Rng& rng) { return make_critic(critic_widths(d), rng); }

AutoencoderModel make_autoencoder(std::span<const std::size_t> enc, std::span<const std::size_t> dec, Rng& rng) {
    if (enc.empty() || dec.empty() || enc.back() != dec.front() || enc.front() != dec.back())
        throw ArgumentError("encoder and decoder widths do not mirror each other");
    AutoencoderModel m;
    m.encoder = build(enc, rng);
    m.decoder = build(dec, rng);
    return m;
}

CriticModel make_critic(std::span<const std::size_t> widths, Rng& rng) {
    if (widths.empty() || widths.back() != 1) throw ArgumentError("critic must end in a scalar output");
    return {build(widths, rng)};
}

Matrix encode(const AutoencoderModel& model, const Matrix& X) { return mlp_predict(model.encoder, X); }
Matrix decode(const AutoencoderModel& model, const Matrix& Z) { return mlp_predict(model.decoder, Z); }

Matrix encode_all(const AutoencoderModel& model, const Matrix& X, std::size_t chunk) {
    Matrix Z(X.rows(), model.latent_dim());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < X.rows(); start += chunk) {
        const std::size_t end = std::min(X.rows(), start + chunk);
        idx.resize(end - start);
        for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
        const Matrix z = encode(model, gather_rows(X, idx));
        std::copy(z.values().begin(), z.values().end(), Z.values().begin() + static_cast<long>(start * Z.cols()));
    }
    return Z;
}

Matrix interpolate_latent(const Matrix& z1, const Matrix& z2, double alpha) {
    if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw DimensionError("interpolate_latent: shapes differ");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("interpolate_latent: alpha outside [0,1]");
    if (alpha == 1.0) return z1;
    if (alpha == 0.0) return z2;
    Matrix out(z1.rows(), z1.cols());
    auto a = z1.values();
    auto b = z2.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = alpha * a[i] + (1.0 - alpha) * b[i];
    return out;
}

AcaiSample draw_acai_sample(std::size_t batch, Rng& rng, double alpha_max) {
    if (!(alpha_max > 0.0 && alpha_max <= 1.0)) throw ArgumentError("alpha_max must lie in (0,1]");
    AcaiSample s;
    s.partner = rng.permutation(batch);
    s.alpha.resize(batch);
    s.gamma.resize(batch);
    for (auto& a : s.alpha) a = rng.uniform(0.0, alpha_max);
    for (auto& g : s.gamma) g = rng.uniform();
    return s;
}

AcaiLosses acai_losses(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                       const AcaiSample& sample, double lambda) {
    return acai_losses(model, critic, x, x, sample, lambda);
}

AcaiLosses acai_losses(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x, const Matrix& target,
                       const AcaiSample& sample, double lambda) {
    const auto f = shared_forward(model, critic, x, sample);
    return {autoencoder_part(model, critic, target, sample, lambda, f), critic_part(model, critic, target, sample, f)};
}

AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          const AcaiSample& sample, double lambda) {
    return acai_autoencoder_loss(model, critic, x, x, sample, lambda);
}

AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          const Matrix& target, const AcaiSample& sample, double lambda) {
    const auto f = shared_forward(model, critic, x, sample);
    if (target.rows() != x.rows() || target.cols() != f.dec.output.cols())
        throw DimensionError("ACAI target batch does not match the input batch");
    return autoencoder_part(model, critic, target, sample, lambda, f);
}

AcaiAutoencoderLoss acai_autoencoder_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                          Rng& rng, double lambda, double alpha_max) {
    check_pairable(x);
    return acai_autoencoder_loss(model, critic, x, draw_acai_sample(x.rows(), rng, alpha_max), lambda);
}

AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                const AcaiSample& sample) {
    return acai_critic_loss(model, critic, x, x, sample);
}

AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x,
                                const Matrix& target, const AcaiSample& sample) {
    const auto f = shared_forward(model, critic, x, sample);
    return critic_part(model, critic, target, sample, f);
}

AcaiCriticLoss acai_critic_loss(const AutoencoderModel& model, const CriticModel& critic, const Matrix& x, Rng& rng,
                                double alpha_max) {
    check_pairable(x);
    return acai_critic_loss(model, critic, x, draw_acai_sample(x.rows(), rng, alpha_max));
}

std::vector<double> flatten_params(const AutoencoderModel& model) {
    auto flat = flatten_params(model.encoder);
    auto dec = flatten_params(model.decoder);
    flat.insert(flat.end(), dec.begin(), dec.end());
    return flat;
}

void assign_params(AutoencoderModel& model, std::span<const double> flat) {
    const std::size_t ne = model.encoder.parameter_count();
    if (flat.size() != ne + model.decoder.parameter_count())
        throw DimensionError("assign_params: wrong autoencoder parameter count");
    assign_params(model.encoder, flat.subspan(0, ne));
    assign_params(model.decoder, flat.subspan(ne));
}

std::vector<double> flatten_grads(const AutoencoderGrads& g) {
    auto flat = flatten_grads(g.encoder);
    auto dec = flatten_grads(g.decoder);
    flat.insert(flat.end(), dec.begin(), dec.end());
    return flat;
}

}  // namespace dynae
