#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dynae/cluster.hpp"
#include "dynae/matrix.hpp"
#include "dynae/pretrain.hpp"

namespace dynae {

/// Everything a command needs. Defaults are the published hyperparameters.
struct RunConfig {
    std::optional<std::filesystem::path> data;
    std::optional<std::filesystem::path> labels;
    std::filesystem::path out = "run";
    std::optional<std::filesystem::path> checkpoint;
    std::uint64_t seed = 0;
    Precision precision = Precision::f64;

    std::vector<std::size_t> hidden{500, 500, 2000};  // encoder hidden widths, mirrored in the decoder
    std::size_t latent = kLatentDim;

    PretrainConfig pretrain;
    ClusterConfig cluster;

    /// Sets one key. Throws ConfigError on an unknown key or a malformed value.
    void set(const std::string& key, const std::string& value);
    /// Copies shared settings (seed, augmentation) into the per-phase configs and validates them.
    void finalize();

    std::vector<std::size_t> encoder_widths(std::size_t d) const;
    std::vector<std::size_t> decoder_widths(std::size_t d) const;
    std::vector<std::size_t> critic_widths(std::size_t d) const;

    AugmentConfig augment{.enabled = true};
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Flat "key = value" lines; '#' starts a comment, blank lines are ignored.
ConfigEntries parse_config_text(const std::string& text);
ConfigEntries read_config_file(const std::filesystem::path& path);

/// "key=value" as given to --set.
std::pair<std::string, std::string> parse_assignment(const std::string& text);

/// Every recognised key, for help output.
std::vector<std::string> config_keys();

}  // namespace dynae
