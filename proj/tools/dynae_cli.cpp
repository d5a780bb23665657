#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dynae/checkpoint.hpp"
#include "dynae/cluster.hpp"
#include "dynae/config.hpp"
#include "dynae/diagnostics.hpp"
#include "dynae/errors.hpp"
#include "dynae/fileio.hpp"
#include "dynae/metrics.hpp"
#include "dynae/pretrain.hpp"

using namespace dynae;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Flags {
    std::string config;
    std::string data, labels, out, checkpoint, precision, gamma;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key = value configuration file");
    cmd->add_option("--data", f.data, "dataset (IDX images or USPS container)");
    cmd->add_option("--labels", f.labels, "IDX label file");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--checkpoint", f.checkpoint, "checkpoint to start from");
    cmd->add_option("--gamma", f.gamma, "weight of the embedded clustering term (omit for L1 + L2)");
    cmd->add_option("--precision", f.precision, "matmul precision")->check(CLI::IsMember({"f32", "f64"}));
    cmd->add_option("--set", f.sets, "override any configuration key, key=value");
}

// defaults, then the file, then flags
RunConfig resolve(const Flags& f) {
    RunConfig cfg;
    if (!f.config.empty())
        for (const auto& [k, v] : read_config_file(f.config)) cfg.set(k, v);
    if (!f.data.empty()) cfg.set("data", f.data);
    if (!f.labels.empty()) cfg.set("labels", f.labels);
    if (!f.out.empty()) cfg.set("out", f.out);
    if (!f.checkpoint.empty()) cfg.set("checkpoint", f.checkpoint);
    if (!f.precision.empty()) cfg.set("precision", f.precision);
    if (!f.gamma.empty()) cfg.set("cluster.gamma", f.gamma);
    if (f.seed) cfg.set("seed", std::to_string(*f.seed));
    for (const auto& s : f.sets) {
        const auto [k, v] = parse_assignment(s);
        cfg.set(k, v);
    }
    cfg.finalize();
    set_compute_precision(cfg.precision);
    return cfg;
}

Dataset require_dataset(const RunConfig& cfg) {
    if (!cfg.data) throw ConfigError("no dataset given (--data or data = ...)");
    if (!std::filesystem::exists(*cfg.data)) throw ConfigError("dataset not found: " + cfg.data->string());
    if (cfg.labels && !std::filesystem::exists(*cfg.labels))
        throw ConfigError("label file not found: " + cfg.labels->string());
    auto ds = load_dataset(*cfg.data, cfg.labels);
    ds.validate();
    return ds;
}

Checkpoint require_checkpoint(const RunConfig& cfg) {
    if (!cfg.checkpoint) throw ConfigError("no checkpoint given (--checkpoint or checkpoint = ...)");
    if (!std::filesystem::exists(*cfg.checkpoint))
        throw ConfigError("checkpoint not found: " + cfg.checkpoint->string());
    return Checkpoint::load(*cfg.checkpoint);
}

std::string expected_arch_hash(const RunConfig& cfg, std::size_t d) {
    Rng rng(0);
    auto ae = make_autoencoder(cfg.encoder_widths(d), cfg.decoder_widths(d), rng);
    return architecture_hash({&ae.encoder, &ae.decoder});
}

int cmd_pretrain(const RunConfig& cfg) {
    const auto ds = require_dataset(cfg);
    PretrainRunOptions opts{.out_dir = cfg.out, .hidden = cfg.hidden, .latent = cfg.latent};
    if (cfg.checkpoint) opts.resume = *cfg.checkpoint;
    opts.on_log = [&](std::size_t it, const PretrainStepResult& r) {
        std::fprintf(stderr, "pretrain %zu/%zu  l_fg %.6f  l_c %.6f\n", it, cfg.pretrain.iterations, r.l_fg, r.l_c);
    };
    const auto path = run_pretraining(ds, cfg.pretrain, opts);
    std::cout << path.string() << "\n";
    return 0;
}

int cmd_cluster(const RunConfig& cfg, const std::string& mode) {
    const auto ds = require_dataset(cfg);
    const auto ck = require_checkpoint(cfg);
    if (ck.arch_hash != expected_arch_hash(cfg, ds.dim()))
        throw ConfigError("checkpoint architecture does not match the configured network");
    const auto model = load_autoencoder(ck);
    std::filesystem::create_directories(cfg.out);

    if (mode == "kmeans") {
        const auto r = baseline_kmeans(ds, model, cfg.cluster);
        write_assignments(cfg.out / "assignments.txt", r.labels);
        if (ds.labels)
            std::printf("ACC %.4f\nNMI %.4f\n", acc(*ds.labels, r.labels), nmi(*ds.labels, r.labels));
        return 0;
    }
    ClusterRunOptions opts{.out_dir = cfg.out};
    opts.on_window = [](const WindowRecord& w) {
        std::fprintf(stderr, "cluster %zu  tau %.4f  conflicted %zu%s  acc %.4f  nmi %.4f\n", w.iter, w.tau,
                     w.conflicted, w.escaped ? " (escape)" : "", w.acc_all, w.nmi_all);
    };
    const auto r = run_clustering(ds, model, cfg.cluster, opts);
    if (ds.labels)
        std::printf("ACC %.4f\nNMI %.4f\n", acc(*ds.labels, r.assignments), nmi(*ds.labels, r.assignments));
    return 0;
}

// Integer labels from an IDX label file, a USPS container, or text lines ("value" or "index,value").
std::vector<int> read_labels(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("file not found: " + path.string());
    {
        std::ifstream in(path, std::ios::binary);
        unsigned char m[4] = {};
        in.read(reinterpret_cast<char*>(m), 4);
        const std::uint32_t be = (std::uint32_t(m[0]) << 24) | (std::uint32_t(m[1]) << 16) | (std::uint32_t(m[2]) << 8) | m[3];
        const std::uint32_t le = (std::uint32_t(m[3]) << 24) | (std::uint32_t(m[2]) << 16) | (std::uint32_t(m[1]) << 8) | m[0];
        if (be == kIdxLabelsMagic) return load_idx_labels(path);
        if (le == kUspsMagic) {
            auto ds = load_usps(path);
            if (!ds.labels) throw FormatError(path.string() + " holds no labels");
            return *ds.labels;
        }
    }
    std::ifstream in(path);
    std::vector<int> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        const std::string value = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(value, &used));
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": cannot parse label line '" + line + "'");
        }
    }
    return out;
}

int cmd_eval(const std::string& assignments, const RunConfig& cfg) {
    if (!cfg.labels) throw ConfigError("eval needs --labels");
    const auto pred = read_labels(assignments);
    const auto truth = read_labels(*cfg.labels);
    if (pred.size() != truth.size())
        throw ConfigError("assignment and label files differ in length (" + std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
    if (pred.empty()) throw ConfigError("no labels to evaluate");
    const double a = acc(truth, pred), n = nmi(truth, pred);
    std::printf("ACC %.4f\nNMI %.4f\n", a, n);
    std::filesystem::create_directories(cfg.out);
    write_file_atomic(cfg.out / "metrics.csv", "acc,nmi\n" + format_number(a) + "," + format_number(n) + "\n");
    return 0;
}

int cmd_diagnose(const RunConfig& cfg, bool want_deltas) {
    const auto ds = require_dataset(cfg);
    if (want_deltas && !ds.labels) throw ConfigError("gradient diagnostics need --labels");
    const auto ck = require_checkpoint(cfg);
    const auto model = load_autoencoder(ck);
    if (model.input_dim() != ds.dim()) throw ConfigError("checkpoint input dimension differs from the dataset");
    std::filesystem::create_directories(cfg.out);

    const Matrix Z = encode_all(model, ds.X);
    const Matrix P = pca2d(Z);
    std::ostringstream pca;
    pca << (ds.labels ? "pc1,pc2,label\n" : "pc1,pc2\n");
    for (std::size_t i = 0; i < P.rows(); ++i) {
        pca << format_number(P(i, 0)) << "," << format_number(P(i, 1));
        if (ds.labels) pca << "," << (*ds.labels)[i];
        pca << "\n";
    }
    write_file_atomic(cfg.out / "pca.csv", pca.str());

    if (!ds.labels) return 0;
    ClusterState st;
    if (ck.strings.count("kind") && ck.text("kind") == "cluster") {
        st = load_cluster_state(ck);
        if (st.conflicted.size() != ds.size()) throw ConfigError("clustering checkpoint belongs to another dataset");
    } else {
        Rng rng(cfg.cluster.seed);
        st = init_cluster_state(Z, ds.X, cfg.cluster, rng);
    }
    Rng pick(cfg.cluster.seed ^ 0xC1A8);
    auto idx = pick.permutation(ds.size());
    idx.resize(std::min(cfg.cluster.diagnostic_batch, ds.size()));
    const Matrix xb = gather_rows(ds.X, idx);
    std::vector<int> yb;
    for (auto i : idx) yb.push_back((*ds.labels)[i]);
    const auto map = cluster_of_class(*ds.labels, st.assignments, st.K());
    double fr = NAN, fd = NAN;
    try {
        fr = delta_fr(model, idx, xb, yb, map, st);
    } catch (const UnavailableError&) {
    }
    try {
        fd = delta_fd(model, idx, xb, st);
    } catch (const UnavailableError&) {
    }
    const double iter = ck.meta.count("iteration") ? ck.scalar("iteration") : 0.0;
    write_file_atomic(cfg.out / "diagnostics.csv",
                      "iter,delta_fr,delta_fd\n" + format_number(iter) + "," + format_number(fr) + "," +
                          format_number(fd) + "\n");
    std::printf("delta_fr %.4f\ndelta_fd %.4f\n", fr, fd);
    return 0;
}

// Virtual CPUs sometimes hide their model and OpenBLAS falls back to its
// generic x86-64 kernels, which are several times slower.
void warn_slow_blas() {
    std::string core = blas_core_name();
    std::transform(core.begin(), core.end(), core.begin(), [](unsigned char c) { return std::tolower(c); });
    if (core == "prescott" || core == "core2" || core == "atom" || core == "unknown")
        std::cerr << "warning: OpenBLAS is using its generic '" << blas_core_name()
                  << "' kernels; set OPENBLAS_CORETYPE (e.g. Haswell or SkylakeX) for full speed\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep clustering with a dynamic autoencoder"};
    app.require_subcommand(1);
    Flags f;
    std::string mode = "dynae", assignments;
    bool deltas = false;

    auto* pre = app.add_subcommand("pretrain", "adversarially regularised autoencoder pretraining");
    add_common(pre, f);
    auto* clu = app.add_subcommand("cluster", "dynamic clustering from a pretrained checkpoint");
    add_common(clu, f);
    clu->add_option("--mode", mode, "dynae or the kmeans baseline")->check(CLI::IsMember({"dynae", "kmeans"}));
    auto* ev = app.add_subcommand("eval", "ACC and NMI of an assignment file");
    add_common(ev, f);
    ev->add_option("assignments", assignments, "index,cluster file")->required();
    auto* dia = app.add_subcommand("diagnose", "PCA projection and gradient diagnostics of a checkpoint");
    add_common(dia, f);
    dia->add_flag("--deltas", deltas, "require the gradient diagnostics (needs labels)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        const RunConfig cfg = resolve(f);
        if (!ev->parsed()) warn_slow_blas();
        if (pre->parsed()) return cmd_pretrain(cfg);
        if (clu->parsed()) return cmd_cluster(cfg, mode);
        if (ev->parsed()) return cmd_eval(assignments, cfg);
        return cmd_diagnose(cfg, deltas);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
