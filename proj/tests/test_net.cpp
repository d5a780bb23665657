#include <doctest.h>

#include <fstream>

#include "dynae/checkpoint.hpp"
#include "dynae/errors.hpp"
#include "dynae/loss.hpp"
#include "dynae/net.hpp"
#include "dynae/pretrain.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dynae;

namespace {

AcaiSample fixed_sample(std::size_t b, Rng& rng) { return draw_acai_sample(b, rng); }

CriticModel tiny_critic(std::size_t d, Rng& rng) { return {testing::random_mlp({d, 5, 1}, rng)}; }

}  // namespace

TEST_CASE("standard widths") {
    CHECK(encoder_widths(784) == std::vector<std::size_t>{784, 500, 500, 2000, 10});
    CHECK(decoder_widths(784) == std::vector<std::size_t>{10, 2000, 500, 500, 784});
    CHECK(critic_widths(784) == std::vector<std::size_t>{784, 500, 500, 2000, 1});
    Rng rng(1);
    auto m = make_autoencoder(16, rng);
    CHECK(m.latent_dim() == kLatentDim);
    CHECK(m.encoder.layers[0].activation == Activation::relu);
    CHECK(m.encoder.layers.back().activation == Activation::linear);
    CHECK(m.decoder.layers.back().activation == Activation::linear);
    auto c = make_critic(16, rng);
    CHECK(c.net.output_size() == 1);
    CHECK(c.net.layers.back().activation == Activation::linear);
}

TEST_CASE("encode and decode") {
    Rng rng(2);
    auto m = testing::tiny_autoencoder(4, 2, 3, rng);
    Mlp zero = m.encoder;
    for (auto& l : zero.layers) l.weights.fill(0.0);
    AutoencoderModel zm{zero, m.decoder};
    auto x = testing::random_matrix(3, 4, rng);
    auto z = encode(zm, x);
    auto bias_only = testing::naive_forward(zero, Matrix(1, 4));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 2; ++k) CHECK(z(i, k) == bias_only(0, k));

    Matrix dup(2, 4);
    for (std::size_t k = 0; k < 4; ++k) dup(0, k) = dup(1, k) = x(0, k);
    auto zd = encode(m, dup);
    CHECK(std::equal(zd.row(0).begin(), zd.row(0).end(), zd.row(1).begin()));

    auto ze = encode(m, x);
    auto ref = testing::naive_forward(m.encoder, x);
    for (std::size_t i = 0; i < ze.size(); ++i) CHECK(std::abs(ze.values()[i] - ref.values()[i]) < 1e-12);
    auto xd = decode(m, ze);
    auto refd = testing::naive_forward(m.decoder, ze);
    for (std::size_t i = 0; i < xd.size(); ++i) CHECK(std::abs(xd.values()[i] - refd.values()[i]) < 1e-12);

    AutoencoderModel ident;
    ident.encoder.layers.push_back({Matrix::identity(3), {0, 0, 0}, Activation::linear});
    ident.decoder = ident.encoder;
    CHECK(decode(ident, encode(ident, x.rows() ? Matrix{{1, 2, 3}} : Matrix{})) == Matrix{{1, 2, 3}});

    auto big = testing::random_matrix(50, 4, rng);
    CHECK(encode_all(m, big, 7) == encode(m, big));
}

TEST_CASE("latent interpolation") {
    Matrix a{{2, 0}}, b{{0, 2}};
    CHECK(interpolate_latent(a, b, 1.0) == a);
    CHECK(interpolate_latent(a, b, 0.0) == b);
    CHECK(interpolate_latent(a, b, 0.5) == Matrix{{1, 1}});
    CHECK_THROWS_AS(interpolate_latent(a, b, 1.5), ArgumentError);
}

TEST_CASE("autoencoder loss without the critic term is plain mse") {
    Rng rng(3);
    auto m = testing::tiny_autoencoder(5, 2, 4, rng);
    auto c = tiny_critic(5, rng);
    auto x = testing::random_matrix(4, 5, rng, 0, 1);
    auto s = fixed_sample(4, rng);
    auto l = acai_autoencoder_loss(m, c, x, s, 0.0);
    CHECK(l.value == mse_loss(decode(m, encode(m, x)), x).value);

    CriticModel zero = c;
    for (auto& layer : zero.net.layers) {
        layer.weights.fill(0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    auto lz = acai_autoencoder_loss(m, zero, x, s, 0.5);
    CHECK(lz.critic_term == 0.0);
    CHECK(lz.value == lz.reconstruction);
}

TEST_CASE("autoencoder loss value and gradient") {
    Rng rng(4);
    auto m = testing::tiny_autoencoder(5, 3, 6, rng);
    auto c = tiny_critic(5, rng);
    auto x = testing::random_matrix(6, 5, rng, 0, 1);
    auto s = fixed_sample(6, rng);
    auto l = acai_autoencoder_loss(m, c, x, s, 0.5);
    CHECK(std::abs(l.value - oracle::acai_autoencoder(m, c, x, s, 0.5)) < 1e-12);

    AutoencoderModel probe = m;
    auto numeric = finite_diff_gradient(
        [&](std::span<const double> p) {
            assign_params(probe, p);
            return acai_autoencoder_loss(probe, c, x, s, 0.5).value;
        },
        flatten_params(m), 1e-5);
    CHECK(testing::max_relative_error(flatten_grads(l.grads), numeric) < 1e-4);
    for (double v : flatten_grads(l.critic_grads)) CHECK(v == 0.0);
}

TEST_CASE("critic loss at its optimum and at the alpha = 0 endpoint") {
    Rng rng(5);
    auto m = testing::tiny_autoencoder(4, 2, 3, rng);
    auto x = testing::random_matrix(5, 4, rng, 0, 1);

    CriticModel zero = tiny_critic(4, rng);
    for (auto& layer : zero.net.layers) {
        layer.weights.fill(0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    AcaiSample s = fixed_sample(5, rng);
    std::fill(s.alpha.begin(), s.alpha.end(), 0.0);
    CHECK(acai_critic_loss(m, zero, x, s).value == 0.0);

    auto c = tiny_critic(4, rng);
    auto l = acai_critic_loss(m, c, x, s);
    auto partner_rec = decode(m, encode(m, gather_rows(x, s.partner)));
    auto cp = testing::naive_forward(c.net, partner_rec);
    double expect = 0.0;
    for (std::size_t i = 0; i < 5; ++i) expect += cp(i, 0) * cp(i, 0);
    CHECK(std::abs(l.alpha_term - expect / 5.0) < 1e-12);
}

TEST_CASE("critic loss gradient") {
    Rng rng(6);
    auto m = testing::tiny_autoencoder(5, 2, 4, rng);
    auto c = tiny_critic(5, rng);
    auto x = testing::random_matrix(6, 5, rng, 0, 1);
    auto s = fixed_sample(6, rng);
    auto l = acai_critic_loss(m, c, x, s);
    CHECK(std::abs(l.value - oracle::acai_critic(m, c, x, s)) < 1e-12);
    CriticModel probe = c;
    auto numeric = finite_diff_gradient(
        [&](std::span<const double> p) {
            assign_params(probe.net, p);
            return oracle::acai_critic(m, probe, x, s);
        },
        flatten_params(c.net), 1e-5);
    CHECK(testing::max_relative_error(flatten_grads(l.grads), numeric) < 1e-4);
    for (double v : flatten_grads(l.autoencoder_grads)) CHECK(v == 0.0);

    auto both = acai_losses(m, c, x, s, 0.5);
    CHECK(both.critic.value == l.value);
    CHECK(both.autoencoder.value == acai_autoencoder_loss(m, c, x, s, 0.5).value);
    CHECK_THROWS_AS(acai_critic_loss(m, c, Matrix(1, 5), rng), ArgumentError);
}

TEST_CASE("acai losses scored against a separate clean batch") {
    Rng rng(16);
    auto m = testing::tiny_autoencoder(5, 2, 4, rng);
    auto c = tiny_critic(5, rng);
    auto x = testing::random_matrix(6, 5, rng, 0, 1);
    auto clean = testing::random_matrix(6, 5, rng, 0, 1);
    auto s = fixed_sample(6, rng);

    auto ae = acai_autoencoder_loss(m, c, x, clean, s, 0.5);
    auto cl = acai_critic_loss(m, c, x, clean, s);
    CHECK(std::abs(ae.value - oracle::acai_autoencoder(m, c, x, clean, s, 0.5)) < 1e-12);
    CHECK(std::abs(cl.value - oracle::acai_critic(m, c, x, clean, s)) < 1e-12);
    CHECK(ae.value != acai_autoencoder_loss(m, c, x, s, 0.5).value);

    AutoencoderModel probe = m;
    auto numeric = finite_diff_gradient(
        [&](std::span<const double> p) {
            assign_params(probe, p);
            return oracle::acai_autoencoder(probe, c, x, clean, s, 0.5);
        },
        flatten_params(m), 1e-5);
    CHECK(testing::max_relative_error(flatten_grads(ae.grads), numeric) < 1e-4);
    CriticModel cprobe = c;
    auto cnumeric = finite_diff_gradient(
        [&](std::span<const double> p) {
            assign_params(cprobe.net, p);
            return oracle::acai_critic(m, cprobe, x, clean, s);
        },
        flatten_params(c.net), 1e-5);
    CHECK(testing::max_relative_error(flatten_grads(cl.grads), cnumeric) < 1e-4);

    auto both = acai_losses(m, c, x, clean, s, 0.5);
    CHECK(both.autoencoder.value == ae.value);
    CHECK(both.critic.value == cl.value);
    CHECK_THROWS_AS(acai_autoencoder_loss(m, c, x, Matrix(6, 4), s, 0.5), DimensionError);
    CHECK_THROWS_AS(acai_critic_loss(m, c, x, Matrix(5, 5), s), DimensionError);
}

namespace {

Dataset toy_images(std::size_t n, Rng& rng) {
    Dataset ds;
    ds.shape = {4, 4};
    ds.X = Matrix(n, 16);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        for (std::size_t k = 0; k < 16; ++k) {
            const double base = (y[i] == 0) == (k < 8) ? 0.8 : 0.1;
            ds.X(i, k) = std::clamp(base + 0.05 * rng.normal(), 0.0, 1.0);
        }
    }
    ds.labels = y;
    return ds;
}

PretrainConfig toy_pretrain(std::size_t iters) {
    PretrainConfig cfg;
    cfg.iterations = iters;
    cfg.batch_size = 16;
    cfg.adam_lr = 1e-3;
    cfg.augment.enabled = false;
    cfg.seed = 42;
    cfg.log_every = 10;
    cfg.checkpoint_every = 25;
    return cfg;
}

PretrainState toy_state(std::size_t n, const PretrainConfig& cfg) {
    Rng init(cfg.seed);
    AutoencoderModel ae{testing::random_mlp({16, 12, 3}, init), testing::random_mlp({3, 12, 16}, init)};
    return init_pretraining(std::move(ae), CriticModel{testing::random_mlp({16, 12, 1}, init)}, n, cfg);
}

}  // namespace

TEST_CASE("pretraining steps are deterministic and lambda 0 reports plain reconstruction") {
    Rng rng(7);
    auto ds = toy_images(64, rng);
    auto cfg = toy_pretrain(10);
    auto a = toy_state(64, cfg), b = toy_state(64, cfg);
    for (int i = 0; i < 5; ++i) {
        auto idx = a.batches.next_indices();
        b.batches.next_indices();
        auto batch = gather_rows(ds.X, idx);
        auto ra = pretrain_step(a, batch, ds.shape, cfg);
        auto rb = pretrain_step(b, batch, ds.shape, cfg);
        CHECK(ra.l_fg == rb.l_fg);
        CHECK(ra.l_c == rb.l_c);
    }

    cfg.lambda = 0.0;
    auto st = toy_state(64, cfg);
    auto batch = gather_rows(ds.X, st.batches.next_indices());
    const double expect = mse_loss(decode(st.ae, encode(st.ae, batch)), batch).value;
    auto r = pretrain_step(st, batch, ds.shape, cfg);
    CHECK(r.l_fg == expect);
}

TEST_CASE("critic on the next batch leaves the autoencoder update alone") {
    Rng rng(17);
    auto ds = toy_images(64, rng);
    auto cfg = toy_pretrain(10);
    auto alt = cfg;
    alt.critic_same_batch = false;
    CHECK(alt.hash() != cfg.hash());
    auto a = toy_state(64, cfg), b = toy_state(64, alt);
    auto batch = gather_rows(ds.X, a.batches.next_indices());
    auto other = gather_rows(ds.X, a.batches.next_indices());
    auto ra = pretrain_step(a, batch, ds.shape, cfg);
    auto rb = pretrain_step(b, batch, ds.shape, alt, &other);
    CHECK(ra.l_fg == rb.l_fg);
    CHECK(flatten_params(a.ae) == flatten_params(b.ae));
    CHECK(flatten_params(a.critic.net) != flatten_params(b.critic.net));
}

TEST_CASE("pretraining lowers reconstruction on a toy set") {
    Rng rng(8);
    auto ds = toy_images(64, rng);
    auto cfg = toy_pretrain(200);
    auto st = toy_state(64, cfg);
    std::vector<double> window_means;
    double sum = 0.0;
    for (std::size_t it = 1; it <= 200; ++it) {
        auto idx = st.batches.next_indices();
        auto r = pretrain_step(st, gather_rows(ds.X, idx), ds.shape, cfg);
        sum += r.reconstruction;
        if (it % 50 == 0) {
            window_means.push_back(sum / 50.0);
            sum = 0.0;
        }
    }
    for (std::size_t i = 1; i < window_means.size(); ++i) CHECK(window_means[i] < window_means[i - 1]);
}

TEST_CASE("run_pretraining writes checkpoint and log, and resumes exactly") {
    Rng rng(9);
    auto ds = toy_images(40, rng);
    testing::TempDir dir("pretrain");
    PretrainRunOptions opts{.out_dir = dir / "zero", .hidden = {12}, .latent = 3};

    auto cfg0 = toy_pretrain(0);
    auto path = run_pretraining(ds, cfg0, opts);
    CHECK(std::filesystem::exists(path));
    {
        std::ifstream in(dir / "zero" / "pretrain_log.csv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 1);
    }

    auto cfg = toy_pretrain(60);
    opts.out_dir = dir / "full";
    auto full = Checkpoint::load(run_pretraining(ds, cfg, opts));
    {
        std::ifstream in(dir / "full" / "pretrain_log.csv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 1 + cfg.iterations / cfg.log_every);
    }

    auto half = cfg;
    half.iterations = 25;
    opts.out_dir = dir / "resumed";
    run_pretraining(ds, half, opts);
    opts.resume = dir / "resumed" / "pretrain.ckpt";
    auto resumed = Checkpoint::load(run_pretraining(ds, cfg, opts));
    CHECK(flatten_params(load_autoencoder(resumed)) == flatten_params(load_autoencoder(full)));
    CHECK(resumed.scalar("iteration") == 60);

    auto other = cfg;
    other.lambda = 0.25;
    CHECK_THROWS_AS(restore_pretraining(Checkpoint::load(dir / "full" / "pretrain.ckpt"), 40, other), ConfigError);
}

TEST_CASE("checkpoint container round trip") {
    Rng rng(10);
    testing::TempDir dir("ckpt");
    Checkpoint ck;
    ck.config_hash = "abc";
    ck.meta["x"] = 1.25;
    ck.strings["s"] = "hello";
    ck.arrays["m"] = testing::random_matrix(3, 2, rng);
    auto net = testing::random_mlp({3, 4, 2}, rng);
    put_mlp(ck, "net", net);
    ck.save(dir / "a.ckpt");
    auto back = Checkpoint::load(dir / "a.ckpt");
    CHECK(back.config_hash == "abc");
    CHECK(back.scalar("x") == 1.25);
    CHECK(back.text("s") == "hello");
    CHECK(back.array("m") == ck.array("m"));
    auto net2 = get_mlp(back, "net");
    CHECK(flatten_params(net2) == flatten_params(net));
    CHECK(net2.layers[0].activation == Activation::relu);

    ck.save(dir / "b.ckpt", Checkpoint::Storage::f32);
    auto f = Checkpoint::load(dir / "b.ckpt");
    CHECK(std::abs(f.array("m")(1, 1) - ck.array("m")(1, 1)) < 1e-6);

    {
        std::ofstream out(dir / "junk.ckpt", std::ios::binary);
        out << "NOTACKPT";
    }
    CHECK_THROWS_AS(Checkpoint::load(dir / "junk.ckpt"), FormatError);
    CHECK(architecture_hash({&net}) == architecture_hash({&net2}));
    CHECK(architecture_hash({&net}) != architecture_hash({&net, &net2}));
}
