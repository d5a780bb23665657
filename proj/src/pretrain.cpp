#include "dynae/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "dynae/errors.hpp"
#include "dynae/fileio.hpp"

namespace dynae {

void PretrainConfig::validate() const {
    if (iterations > 0 && batch_size < 2) throw ConfigError("pretrain.batch_size must be at least 2");
    if (!(adam_lr > 0.0)) throw ConfigError("pretrain.lr must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("pretrain.lambda must be non-negative");
    if (!(alpha_max > 0.0 && alpha_max <= 1.0)) throw ConfigError("pretrain.alpha_max must lie in (0,1]");
    if (checkpoint_every == 0 || log_every == 0) throw ConfigError("pretrain intervals must be positive");
    augment.validate();
}

std::string PretrainConfig::hash() const {
    std::ostringstream os;
    os.precision(17);
    os << "pretrain;lr=" << adam_lr << ";bs=" << batch_size << ";lambda=" << lambda << ";amax=" << alpha_max
       << ";aug=" << augment.enabled << "," << augment.max_shift_fraction << "," << augment.max_rotation_degrees
       << ";seed=" << seed << ";target=clean";
    if (!critic_same_batch) os << ";critic=next";  // absent for the default so older checkpoints still match
    return stable_hash(os.str());
}

namespace {

OptimizerHyper adam_hyper(const PretrainConfig& cfg) {
    OptimizerHyper h;
    h.lr = cfg.adam_lr;
    return h;
}

constexpr std::uint64_t kBatchStream = 0x5EED0001;
constexpr std::uint64_t kStepStream = 0x5EED0002;

}  // namespace

PretrainState init_pretraining(std::size_t n, std::size_t d, const PretrainConfig& cfg) {
    Rng init(cfg.seed);
    auto ae = make_autoencoder(d, init);
    auto critic = make_critic(d, init);
    return init_pretraining(std::move(ae), std::move(critic), n, cfg);
}

PretrainState init_pretraining(AutoencoderModel ae, CriticModel critic, std::size_t n, const PretrainConfig& cfg) {
    const auto h = adam_hyper(cfg);
    auto enc_opt = make_optimizer(ae.encoder, OptimizerKind::adam, h);
    auto dec_opt = make_optimizer(ae.decoder, OptimizerKind::adam, h);
    auto critic_opt = make_optimizer(critic.net, OptimizerKind::adam, h);
    return PretrainState{std::move(ae),
                         std::move(critic),
                         std::move(enc_opt),
                         std::move(dec_opt),
                         std::move(critic_opt),
                         BatchIterator(n, std::max<std::size_t>(cfg.batch_size, 1), cfg.seed ^ kBatchStream),
                         Rng(cfg.seed ^ kStepStream),
                         0,
                         0.0};
}

PretrainStepResult pretrain_step(PretrainState& st, const Matrix& batch, ImageShape shape, const PretrainConfig& cfg,
                                 const Matrix* critic_batch) {
    const Matrix x = augment(batch, shape, cfg.augment, st.rng);
    const auto sample = draw_acai_sample(x.rows(), st.rng, cfg.alpha_max);
    AcaiLosses losses;
    if (critic_batch) {
        losses.autoencoder = acai_autoencoder_loss(st.ae, st.critic, x, batch, sample, cfg.lambda);
        const Matrix xc = augment(*critic_batch, shape, cfg.augment, st.rng);
        losses.critic =
            acai_critic_loss(st.ae, st.critic, xc, *critic_batch, draw_acai_sample(xc.rows(), st.rng, cfg.alpha_max));
    } else {
        losses = acai_losses(st.ae, st.critic, x, batch, sample, cfg.lambda);
    }
    if (!std::isfinite(losses.autoencoder.value) || !std::isfinite(losses.critic.value))
        throw NumericError("pretraining loss became non-finite at iteration " + std::to_string(st.iteration + 1));
    optimizer_step(st.ae.encoder, losses.autoencoder.grads.encoder, st.enc_opt);
    optimizer_step(st.ae.decoder, losses.autoencoder.grads.decoder, st.dec_opt);
    optimizer_step(st.critic.net, losses.critic.grads, st.critic_opt);
    ++st.iteration;
    return {losses.autoencoder.value, losses.critic.value, losses.autoencoder.reconstruction};
}

void put_autoencoder(Checkpoint& ck, const AutoencoderModel& ae) {
    put_mlp(ck, "encoder", ae.encoder);
    put_mlp(ck, "decoder", ae.decoder);
}

AutoencoderModel load_autoencoder(const Checkpoint& ck) {
    AutoencoderModel ae{get_mlp(ck, "encoder"), get_mlp(ck, "decoder")};
    if (ae.encoder.layers.empty() || ae.decoder.layers.empty() || ae.encoder.output_size() != ae.decoder.input_size() ||
        ae.encoder.input_size() != ae.decoder.output_size())
        throw FormatError("checkpoint holds an inconsistent autoencoder");
    return ae;
}

Checkpoint pretrain_checkpoint(const PretrainState& st, const PretrainConfig& cfg, ImageShape shape) {
    Checkpoint ck;
    ck.config_hash = cfg.hash();
    ck.arch_hash = architecture_hash({&st.ae.encoder, &st.ae.decoder});
    ck.strings["kind"] = "pretrain";
    put_autoencoder(ck, st.ae);
    put_mlp(ck, "critic", st.critic.net);
    put_optimizer(ck, "opt.encoder", st.enc_opt);
    put_optimizer(ck, "opt.decoder", st.dec_opt);
    put_optimizer(ck, "opt.critic", st.critic_opt);
    ck.meta["iteration"] = static_cast<double>(st.iteration);
    ck.meta["elapsed_seconds"] = st.elapsed_seconds;
    ck.meta["image_height"] = static_cast<double>(shape.height);
    ck.meta["image_width"] = static_cast<double>(shape.width);
    ck.strings["rng"] = st.rng.state();
    const auto bs = st.batches.save();
    ck.strings["batches.rng"] = bs.rng;
    std::vector<double> order(bs.order.begin(), bs.order.end());
    put_vector(ck, "batches.order", order);
    ck.meta["batches.cursor"] = static_cast<double>(bs.cursor);
    ck.meta["batches.epoch"] = static_cast<double>(bs.epoch);
    return ck;
}

PretrainState restore_pretraining(const Checkpoint& ck, std::size_t n, const PretrainConfig& cfg) {
    if (ck.text("kind") != "pretrain") throw FormatError("not a pretraining checkpoint");
    if (ck.config_hash != cfg.hash())
        throw ConfigError("pretraining checkpoint was written with a different configuration");
    auto ae = load_autoencoder(ck);
    CriticModel critic{get_mlp(ck, "critic")};
    PretrainState st = init_pretraining(std::move(ae), std::move(critic), n, cfg);
    st.enc_opt = get_optimizer(ck, "opt.encoder", st.ae.encoder);
    st.dec_opt = get_optimizer(ck, "opt.decoder", st.ae.decoder);
    st.critic_opt = get_optimizer(ck, "opt.critic", st.critic.net);
    st.iteration = static_cast<std::size_t>(ck.scalar("iteration"));
    st.elapsed_seconds = ck.scalar("elapsed_seconds");
    st.rng.restore(ck.text("rng"));
    BatchIterator::State bs;
    bs.rng = ck.text("batches.rng");
    for (double v : get_vector(ck, "batches.order")) bs.order.push_back(static_cast<std::size_t>(v));
    bs.cursor = static_cast<std::size_t>(ck.scalar("batches.cursor"));
    bs.epoch = static_cast<std::size_t>(ck.scalar("batches.epoch"));
    st.batches.restore(bs);
    return st;
}

std::filesystem::path run_pretraining(const Dataset& ds, const PretrainConfig& cfg, const PretrainRunOptions& opts) {
    cfg.validate();
    if (ds.size() < 2) throw ArgumentError("pretraining needs at least two samples");
    std::filesystem::create_directories(opts.out_dir);
    const auto ckpt_path = opts.out_dir / "pretrain.ckpt";
    const auto log_path = opts.out_dir / "pretrain_log.csv";

    auto fresh = [&] {
        std::vector<std::size_t> enc{ds.dim()}, dec{opts.latent}, crit{ds.dim()};
        enc.insert(enc.end(), opts.hidden.begin(), opts.hidden.end());
        enc.push_back(opts.latent);
        dec.insert(dec.end(), opts.hidden.rbegin(), opts.hidden.rend());
        dec.push_back(ds.dim());
        crit.insert(crit.end(), opts.hidden.begin(), opts.hidden.end());
        crit.push_back(1);
        Rng init(cfg.seed);
        auto ae = make_autoencoder(enc, dec, init);
        auto critic = make_critic(crit, init);
        return init_pretraining(std::move(ae), std::move(critic), ds.size(), cfg);
    };
    PretrainState st =
        opts.resume ? restore_pretraining(Checkpoint::load(*opts.resume), ds.size(), cfg) : fresh();
    if (st.ae.input_dim() != ds.dim()) throw ConfigError("checkpoint input dimension differs from the dataset");

    CsvLog log(log_path, {"iter", "l_fg", "l_c", "seconds"}, opts.resume.has_value());
    const auto start = std::chrono::steady_clock::now();
    const double base_seconds = st.elapsed_seconds;
    auto now_seconds = [&] {
        return base_seconds + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    if (st.iteration == 0) pretrain_checkpoint(st, cfg, ds.shape).save(ckpt_path);
    while (st.iteration < cfg.iterations) {
        auto idx = st.batches.next_indices();
        if (idx.size() < 2) continue;  // a trailing singleton chunk cannot form pairs
        const Matrix batch = gather_rows(ds.X, idx);
        std::optional<Matrix> critic_batch;
        if (!cfg.critic_same_batch) {
            auto cidx = st.batches.next_indices();
            if (cidx.size() < 2) cidx = st.batches.next_indices();
            critic_batch = gather_rows(ds.X, cidx);
        }
        const auto r = pretrain_step(st, batch, ds.shape, cfg, critic_batch ? &*critic_batch : nullptr);
        st.elapsed_seconds = now_seconds();
        if (st.iteration % cfg.log_every == 0) {
            log.row({static_cast<double>(st.iteration), r.l_fg, r.l_c, st.elapsed_seconds});
            if (opts.on_log) opts.on_log(st.iteration, r);
        }
        if (st.iteration % cfg.checkpoint_every == 0 || st.iteration == cfg.iterations)
            pretrain_checkpoint(st, cfg, ds.shape).save(ckpt_path);
    }
    return ckpt_path;
}

}  // namespace dynae
