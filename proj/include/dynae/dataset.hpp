#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynae/matrix.hpp"
#include "dynae/rng.hpp"

namespace dynae {

struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t pixels() const noexcept { return height * width; }
};

/// Samples as rows of X, each a flattened grayscale image with values in [0,1].
/// Labels are carried for diagnostics only and never reach the training losses.
struct Dataset {
    Matrix X;
    std::optional<std::vector<int>> labels;
    ImageShape shape;
    std::string name;

    std::size_t size() const noexcept { return X.rows(); }
    std::size_t dim() const noexcept { return X.cols(); }
    /// Number of distinct classes (max label + 1), 0 without labels.
    std::size_t class_count() const;
    /// Throws FormatError/ConsistencyError when an invariant does not hold.
    void validate() const;
};

// IDX (big-endian) images: magic 0x00000803, labels: magic 0x00000801.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels = {});
std::vector<int> load_idx_labels(const std::filesystem::path& labels);
void save_idx_images(const std::filesystem::path& path, const Matrix& X, ImageShape shape);
void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels);

// USPS container, little-endian:
//   u32 magic "USPS" (0x53505355), u32 N, u32 d, N*d float32 pixels,
//   optionally followed by N u32 labels (present iff the file is long enough).
// d must be a perfect square. Pixel values already inside [0,1] are kept as is;
// otherwise every value is mapped by (v - min) / (max - min) over the whole payload.
inline constexpr std::uint32_t kUspsMagic = 0x53505355;

Dataset load_usps(const std::filesystem::path& path);
void save_usps(const std::filesystem::path& path, const Matrix& X, std::span<const int> labels = {});

/// Picks the loader from the file's magic number.
Dataset load_dataset(const std::filesystem::path& data, const std::optional<std::filesystem::path>& labels = {});

struct AugmentConfig {
    bool enabled = false;
    double max_shift_fraction = 0.1;
    double max_rotation_degrees = 10.0;

    void validate() const;
};

/// Rotates about the image centre by `degrees` (counter-clockwise as displayed,
/// rows growing downwards) and then translates by (dx columns, dy rows). Bilinear
/// sampling, zero padding, result clipped to [0,1].
void transform_image(std::span<const double> src, std::span<double> dst, ImageShape shape, int dx, int dy,
                     double degrees);

/// Independent random shift and rotation of every row.
Matrix augment(const Matrix& batch, ImageShape shape, const AugmentConfig& cfg, Rng& rng);

struct Batch {
    std::vector<std::size_t> indices;
    Matrix X;
};

/// Index chunks of one epoch: a random permutation split into consecutive chunks,
/// the last of which may be short.
std::vector<std::vector<std::size_t>> epoch_chunks(std::size_t n, std::size_t batch_size, Rng& rng);

/// Endless stream of mini-batches, reshuffling at every epoch boundary. Its full
/// state (rng, current permutation, cursor) can be saved and restored.
class BatchIterator {
public:
    BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed);

    /// Next chunk of indices.
    std::vector<std::size_t> next_indices();
    Batch next(const Matrix& X);

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch_size() const noexcept { return batch_size_; }

    struct State {
        std::string rng;
        std::vector<std::size_t> order;
        std::size_t cursor = 0;
        std::size_t epoch = 0;
    };
    State save() const;
    void restore(const State& s);

private:
    void reshuffle();

    std::size_t n_;
    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t epoch_ = 0;
};

}  // namespace dynae
