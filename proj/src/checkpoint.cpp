#include "dynae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dynae/errors.hpp"
#include "dynae/fileio.hpp"

namespace dynae {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'A', 'E', 'C', 'K', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

template <typename T>
void append_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T read_raw(const std::string& in, std::size_t off) {
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    return v;
}

}  // namespace

const Matrix& Checkpoint::array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("checkpoint has no array '" + name + "'");
    return it->second;
}

double Checkpoint::scalar(const std::string& name) const {
    auto it = meta.find(name);
    if (it == meta.end()) throw FormatError("checkpoint has no scalar '" + name + "'");
    return it->second;
}

const std::string& Checkpoint::text(const std::string& name) const {
    auto it = strings.find(name);
    if (it == strings.end()) throw FormatError("checkpoint has no string '" + name + "'");
    return it->second;
}

void Checkpoint::save(const std::filesystem::path& path, Storage storage) const {
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["config_hash"] = config_hash;
    manifest["arch_hash"] = arch_hash;
    manifest["meta"] = meta;
    manifest["strings"] = strings;
    manifest["arrays"] = nlohmann::json::array();
    const std::size_t width = storage == Storage::f64 ? 8 : 4;
    std::size_t offset = 0;
    for (const auto& [name, m] : arrays) {
        manifest["arrays"].push_back({{"name", name},
                                      {"rows", m.rows()},
                                      {"cols", m.cols()},
                                      {"dtype", storage == Storage::f64 ? "f64" : "f32"},
                                      {"offset", offset}});
        offset += m.size() * width;
    }
    const std::string text = manifest.dump(1);
    std::string out;
    out.reserve(16 + text.size() + offset);
    out.append(kMagic, 8);
    append_raw<std::uint64_t>(out, text.size());
    out += text;
    for (const auto& [name, m] : arrays) {
        for (double v : m.values()) {
            if (storage == Storage::f64)
                append_raw<double>(out, v);
            else
                append_raw<float>(out, static_cast<float>(v));
        }
    }
    write_file_atomic(path, out);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw FormatError(path.string() + " is not a checkpoint");
    const auto len = read_raw<std::uint64_t>(bytes, 8);
    if (bytes.size() < 16 + len) throw IoError(path.string() + ": truncated manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(16, len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad manifest: " + e.what());
    }
    const std::size_t base = 16 + len;
    Checkpoint ck;
    ck.config_hash = manifest.value("config_hash", "");
    ck.arch_hash = manifest.value("arch_hash", "");
    ck.meta = manifest.value("meta", std::map<std::string, double>{});
    ck.strings = manifest.value("strings", std::map<std::string, std::string>{});
    for (const auto& a : manifest.at("arrays")) {
        const std::size_t rows = a.at("rows"), cols = a.at("cols"), off = a.at("offset");
        const bool f64 = a.at("dtype") == "f64";
        const std::size_t width = f64 ? 8 : 4;
        if (base + off + rows * cols * width > bytes.size()) throw IoError(path.string() + ": truncated payload");
        Matrix m(rows, cols);
        auto v = m.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t at = base + off + i * width;
            v[i] = f64 ? read_raw<double>(bytes, at) : static_cast<double>(read_raw<float>(bytes, at));
        }
        ck.arrays.emplace(a.at("name").get<std::string>(), std::move(m));
    }
    return ck;
}

void put_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net) {
    ck.meta[prefix + ".layers"] = static_cast<double>(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        const std::string p = prefix + "." + std::to_string(i);
        ck.arrays[p + ".w"] = l.weights;
        ck.arrays[p + ".b"] = Matrix(1, l.bias.size(), l.bias);
        ck.meta[p + ".relu"] = l.activation == Activation::relu ? 1.0 : 0.0;
    }
}

Mlp get_mlp(const Checkpoint& ck, const std::string& prefix) {
    Mlp net;
    const auto n = static_cast<std::size_t>(ck.scalar(prefix + ".layers"));
    for (std::size_t i = 0; i < n; ++i) {
        const std::string p = prefix + "." + std::to_string(i);
        DenseLayer l;
        l.weights = ck.array(p + ".w");
        const auto& b = ck.array(p + ".b");
        l.bias.assign(b.values().begin(), b.values().end());
        if (l.bias.size() != l.weights.cols()) throw FormatError("checkpoint layer " + p + " has inconsistent bias");
        l.activation = ck.scalar(p + ".relu") != 0.0 ? Activation::relu : Activation::linear;
        net.layers.push_back(std::move(l));
    }
    return net;
}

namespace {

void put_grads(Checkpoint& ck, const std::string& prefix, const MlpGrads& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string p = prefix + "." + std::to_string(i);
        ck.arrays[p + ".w"] = g[i].weights;
        ck.arrays[p + ".b"] = Matrix(1, g[i].bias.size(), g[i].bias);
    }
}

MlpGrads get_grads(const Checkpoint& ck, const std::string& prefix, const Mlp& net) {
    MlpGrads g = zero_grads(net);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::string p = prefix + "." + std::to_string(i);
        const auto& w = ck.array(p + ".w");
        const auto& b = ck.array(p + ".b");
        if (w.rows() != g[i].weights.rows() || w.cols() != g[i].weights.cols() || b.size() != g[i].bias.size())
            throw FormatError("optimizer buffer " + p + " does not match the network");
        g[i].weights = w;
        g[i].bias.assign(b.values().begin(), b.values().end());
    }
    return g;
}

}  // namespace

void put_optimizer(Checkpoint& ck, const std::string& prefix, const OptimizerState& s) {
    ck.meta[prefix + ".kind"] = s.kind == OptimizerKind::adam ? 1.0 : 0.0;
    ck.meta[prefix + ".step"] = static_cast<double>(s.step);
    ck.meta[prefix + ".lr"] = s.hyper.lr;
    ck.meta[prefix + ".momentum"] = s.hyper.momentum;
    ck.meta[prefix + ".beta1"] = s.hyper.beta1;
    ck.meta[prefix + ".beta2"] = s.hyper.beta2;
    ck.meta[prefix + ".epsilon"] = s.hyper.epsilon;
    put_grads(ck, prefix + ".m", s.first);
    if (!s.second.empty()) put_grads(ck, prefix + ".v", s.second);
}

OptimizerState get_optimizer(const Checkpoint& ck, const std::string& prefix, const Mlp& net) {
    OptimizerState s;
    s.kind = ck.scalar(prefix + ".kind") != 0.0 ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
    s.step = static_cast<std::uint64_t>(ck.scalar(prefix + ".step"));
    s.hyper.lr = ck.scalar(prefix + ".lr");
    s.hyper.momentum = ck.scalar(prefix + ".momentum");
    s.hyper.beta1 = ck.scalar(prefix + ".beta1");
    s.hyper.beta2 = ck.scalar(prefix + ".beta2");
    s.hyper.epsilon = ck.scalar(prefix + ".epsilon");
    s.first = get_grads(ck, prefix + ".m", net);
    if (s.kind == OptimizerKind::adam) s.second = get_grads(ck, prefix + ".v", net);
    return s;
}

void put_vector(Checkpoint& ck, const std::string& name, const std::vector<double>& v) {
    ck.arrays[name] = Matrix(1, v.size(), v);
}

std::vector<double> get_vector(const Checkpoint& ck, const std::string& name) {
    const auto& m = ck.array(name);
    return {m.values().begin(), m.values().end()};
}

std::string stable_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string architecture_hash(std::initializer_list<const Mlp*> nets) {
    std::string desc;
    for (const Mlp* net : nets) {
        for (const auto& l : net->layers)
            desc += std::to_string(l.in()) + ">" + std::to_string(l.out()) +
                    (l.activation == Activation::relu ? "r" : "l") + ";";
        desc += "|";
    }
    return stable_hash(desc);
}

}  // namespace dynae
