#include "dynae/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dynae/errors.hpp"

namespace dynae {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        const auto w = to_size(key, part);
        if (w == 0) throw ConfigError(key + ": widths must be positive");
        out.push_back(w);
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data", [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; }},
        {"labels", [](RunConfig& c, const std::string&, const std::string& v) { c.labels = v; }},
        {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
        {"checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
        {"precision",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             try {
                 c.precision = parse_precision(v);
             } catch (const std::exception&) {
                 throw ConfigError(k + ": expected f32 or f64, got '" + v + "'");
             }
         }},
        {"arch.hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden = to_widths(k, v); }},
        {"arch.latent", [](RunConfig& c, const std::string& k, const std::string& v) { c.latent = to_size(k, v); }},
        {"augment.enabled",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.enabled = to_bool(k, v); }},
        {"augment.max_shift_fraction",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.max_shift_fraction = to_double(k, v); }},
        {"augment.max_rotation_degrees",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.augment.max_rotation_degrees = to_double(k, v);
         }},
        {"pretrain.iterations",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.iterations = to_size(k, v); }},
        {"pretrain.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.adam_lr = to_double(k, v); }},
        {"pretrain.batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.batch_size = to_size(k, v); }},
        {"pretrain.lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.lambda = to_double(k, v); }},
        {"pretrain.alpha_max",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.alpha_max = to_double(k, v); }},
        {"pretrain.critic_same_batch",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.critic_same_batch = to_bool(k, v); }},
        {"pretrain.checkpoint_every",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.checkpoint_every = to_size(k, v); }},
        {"pretrain.log_every",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain.log_every = to_size(k, v); }},
        {"cluster.K", [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.K = to_size(k, v); }},
        {"cluster.tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.tol = to_double(k, v); }},
        {"cluster.max_iter",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.max_iter = to_size(k, v); }},
        {"cluster.kappa_init_factor",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.kappa_init_factor = to_double(k, v); }},
        {"cluster.kappa_drop_factor",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.kappa_drop_factor = to_double(k, v); }},
        {"cluster.kappa_update",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "subtract")
                 c.cluster.kappa_update = KappaUpdate::subtract;
             else if (v == "literal")
                 c.cluster.kappa_update = KappaUpdate::literal;
             else
                 throw ConfigError(k + ": expected subtract or literal, got '" + v + "'");
         }},
        {"cluster.kernel_dof",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.kernel_dof = to_double(k, v); }},
        {"cluster.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.sgd_lr = to_double(k, v); }},
        {"cluster.momentum",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.momentum = to_double(k, v); }},
        {"cluster.batch_size",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.batch_size = to_size(k, v); }},
        {"cluster.gamma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v.empty() || v == "none")
                 c.cluster.gamma.reset();
             else
                 c.cluster.gamma = to_double(k, v);
         }},
        {"cluster.eval_every",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.conflict_eval_every = to_size(k, v); }},
        {"cluster.kmeans_restarts",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.kmeans_restarts = to_size(k, v); }},
        {"cluster.diagnostics_every",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.diagnostics_every = to_size(k, v); }},
        {"cluster.diagnostic_batch",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.cluster.diagnostic_batch = to_size(k, v); }},
    };
    return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(*this, key, value);
}

void RunConfig::finalize() {
    pretrain.seed = seed;
    cluster.seed = seed;
    pretrain.augment = augment;
    cluster.augment = augment;
    if (hidden.empty()) throw ConfigError("arch.hidden must list at least one width");
    if (latent == 0) throw ConfigError("arch.latent must be positive");
    try {
        pretrain.validate();
        cluster.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

std::vector<std::size_t> RunConfig::encoder_widths(std::size_t d) const {
    std::vector<std::size_t> w{d};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(latent);
    return w;
}

std::vector<std::size_t> RunConfig::decoder_widths(std::size_t d) const {
    std::vector<std::size_t> w{latent};
    w.insert(w.end(), hidden.rbegin(), hidden.rend());
    w.push_back(d);
    return w;
}

std::vector<std::size_t> RunConfig::critic_widths(std::size_t d) const {
    std::vector<std::size_t> w{d};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
}

ConfigEntries parse_config_text(const std::string& text) {
    ConfigEntries out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
    }
    return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || trim(text.substr(0, eq)).empty())
        throw ConfigError("expected key=value, got '" + text + "'");
    return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

}  // namespace dynae
