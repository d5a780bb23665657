#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dynae/matrix.hpp"
#include "dynae/mlp.hpp"
#include "dynae/optim.hpp"

namespace dynae {

/// Named-array container.
///
/// Layout (little-endian):
///   8 bytes  magic "DYNAECK1"
///   u64      manifest length in bytes
///   manifest JSON text: {"version", "config_hash", "arch_hash", "meta": {...},
///            "strings": {...}, "arrays": [{"name", "rows", "cols", "dtype", "offset"}]}
///   payload  arrays back to back, f64 or f32 as declared, offsets relative to payload start
class Checkpoint {
public:
    enum class Storage { f64, f32 };

    std::string config_hash;
    std::string arch_hash;
    std::map<std::string, double> meta;         // scalars (iteration counters, thresholds, ...)
    std::map<std::string, std::string> strings;  // RNG states and similar text blobs
    std::map<std::string, Matrix> arrays;

    bool has(const std::string& name) const { return arrays.count(name) != 0; }
    const Matrix& array(const std::string& name) const;
    double scalar(const std::string& name) const;
    const std::string& text(const std::string& name) const;

    /// Atomic: written to a temp file, then renamed.
    void save(const std::filesystem::path& path, Storage storage = Storage::f64) const;
    static Checkpoint load(const std::filesystem::path& path);
};

void put_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net);
/// Rebuilds a network from "<prefix>.<i>.w" / ".b" / ".act" entries.
Mlp get_mlp(const Checkpoint& ck, const std::string& prefix);

void put_optimizer(Checkpoint& ck, const std::string& prefix, const OptimizerState& s);
OptimizerState get_optimizer(const Checkpoint& ck, const std::string& prefix, const Mlp& net);

void put_vector(Checkpoint& ck, const std::string& name, const std::vector<double>& v);
std::vector<double> get_vector(const Checkpoint& ck, const std::string& name);

/// FNV-1a over the text, hex encoded.
std::string stable_hash(const std::string& text);

/// Hash of the layer widths and activations of the given networks.
std::string architecture_hash(std::initializer_list<const Mlp*> nets);

}  // namespace dynae
