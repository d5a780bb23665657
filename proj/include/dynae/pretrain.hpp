#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynae/checkpoint.hpp"
#include "dynae/dataset.hpp"
#include "dynae/net.hpp"
#include "dynae/optim.hpp"

namespace dynae {

struct PretrainConfig {
    std::size_t iterations = 130000;
    double adam_lr = 1e-4;
    std::size_t batch_size = 256;
    double lambda = 0.5;
    double alpha_max = 1.0;  // interpolation coefficients drawn from U[0, alpha_max]
    bool critic_same_batch = true;  // false: the critic trains on the following batch instead
    AugmentConfig augment{.enabled = true};
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 1000;
    std::size_t log_every = 100;

    void validate() const;
    /// Hash of every field that affects the trajectory.
    std::string hash() const;
};

/// Everything a pretraining run needs to continue bit-identically after a restart.
struct PretrainState {
    AutoencoderModel ae;
    CriticModel critic;
    OptimizerState enc_opt;
    OptimizerState dec_opt;
    OptimizerState critic_opt;
    BatchIterator batches;
    Rng rng;
    std::size_t iteration = 0;
    double elapsed_seconds = 0.0;
};

/// Fresh models (standard architecture for ds.dim()) with Adam states.
PretrainState init_pretraining(std::size_t n, std::size_t d, const PretrainConfig& cfg);
/// Same, around caller-supplied models.
PretrainState init_pretraining(AutoencoderModel ae, CriticModel critic, std::size_t n, const PretrainConfig& cfg);

struct PretrainStepResult {
    double l_fg = 0.0;
    double l_c = 0.0;
    double reconstruction = 0.0;
};

/// One Adam update of encoder and decoder against the autoencoder loss, then one
/// Adam update of the critic against the critic loss. Both losses are evaluated
/// on the same augmented batch from the same forward pass, unless critic_batch
/// is given, in which case the critic sees that batch with its own pairs.
PretrainStepResult pretrain_step(PretrainState& st, const Matrix& batch, ImageShape shape, const PretrainConfig& cfg,
                                 const Matrix* critic_batch = nullptr);

Checkpoint pretrain_checkpoint(const PretrainState& st, const PretrainConfig& cfg, ImageShape shape);
PretrainState restore_pretraining(const Checkpoint& ck, std::size_t n, const PretrainConfig& cfg);

struct PretrainRunOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> resume;  // checkpoint to continue from
    // Hidden widths of encoder and critic (decoder mirrored) and bottleneck width of a fresh run.
    std::vector<std::size_t> hidden{500, 500, 2000};
    std::size_t latent = kLatentDim;
    std::function<void(std::size_t, const PretrainStepResult&)> on_log;
};

/// Runs cfg.iterations steps, writing out_dir/pretrain.ckpt every checkpoint_every
/// steps and at the end, and out_dir/pretrain_log.csv (iter,l_fg,l_c,seconds) every
/// log_every steps. Returns the checkpoint path.
std::filesystem::path run_pretraining(const Dataset& ds, const PretrainConfig& cfg, const PretrainRunOptions& opts);

/// Autoencoder stored in a pretraining or clustering checkpoint.
AutoencoderModel load_autoencoder(const Checkpoint& ck);
void put_autoencoder(Checkpoint& ck, const AutoencoderModel& ae);

}  // namespace dynae
