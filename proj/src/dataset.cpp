#include "dynae/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dynae/errors.hpp"
#include "dynae/fileio.hpp"

namespace dynae {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) | (std::uint32_t(b[off + 2]) << 8) |
           std::uint32_t(b[off + 3]);
}

std::uint32_t read_le32(const std::vector<unsigned char>& b, std::size_t off) {
    return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) | (std::uint32_t(b[off + 2]) << 16) |
           (std::uint32_t(b[off + 3]) << 24);
}

void put_be32(std::string& out, std::uint32_t v) {
    out.push_back(char(v >> 24));
    out.push_back(char(v >> 16));
    out.push_back(char(v >> 8));
    out.push_back(char(v));
}

void put_le32(std::string& out, std::uint32_t v) {
    out.push_back(char(v));
    out.push_back(char(v >> 8));
    out.push_back(char(v >> 16));
    out.push_back(char(v >> 24));
}

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

std::size_t Dataset::class_count() const {
    if (!labels || labels->empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void Dataset::validate() const {
    if (shape.pixels() != X.cols())
        throw FormatError(name + ": image shape " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                          " does not match dimension " + std::to_string(X.cols()));
    for (double v : X.values())
        if (!(v >= 0.0 && v <= 1.0)) throw FormatError(name + ": pixel value outside [0,1]");
    if (labels) {
        if (labels->size() != X.rows()) throw ConsistencyError(name + ": label count differs from sample count");
        for (int l : *labels)
            if (l < 0) throw FormatError(name + ": negative label");
    }
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
    const auto b = read_all(path);
    if (b.size() < 8) throw IoError(path.string() + ": truncated IDX header");
    const std::uint32_t magic = read_be32(b, 0);
    if (magic != kIdxLabelsMagic) throw FormatError(path.string() + ": bad IDX label magic " + hex(magic));
    const std::size_t n = read_be32(b, 4);
    if (b.size() < 8 + n) throw IoError(path.string() + ": truncated IDX label payload");
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = b[8 + i];
    return labels;
}

Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels) {
    const auto b = read_all(images);
    if (b.size() < 16) throw IoError(images.string() + ": truncated IDX header");
    const std::uint32_t magic = read_be32(b, 0);
    if (magic != kIdxImagesMagic) throw FormatError(images.string() + ": bad IDX image magic " + hex(magic));
    const std::size_t n = read_be32(b, 4);
    const std::size_t h = read_be32(b, 8);
    const std::size_t w = read_be32(b, 12);
    const std::size_t d = h * w;
    if (b.size() < 16 + n * d) throw IoError(images.string() + ": truncated IDX image payload");

    Dataset ds;
    ds.name = images.stem().string();
    ds.shape = {h, w};
    ds.X = Matrix(n, d);
    auto x = ds.X.values();
    for (std::size_t i = 0; i < n * d; ++i) x[i] = static_cast<double>(b[16 + i]) / 255.0;
    if (labels) {
        ds.labels = load_idx_labels(*labels);
        if (ds.labels->size() != n)
            throw ConsistencyError("IDX image count " + std::to_string(n) + " differs from label count " +
                                   std::to_string(ds.labels->size()));
    }
    return ds;
}

void save_idx_images(const std::filesystem::path& path, const Matrix& X, ImageShape shape) {
    if (shape.pixels() != X.cols()) throw DimensionError("save_idx_images: shape does not match columns");
    std::string out;
    out.reserve(16 + X.size());
    put_be32(out, kIdxImagesMagic);
    put_be32(out, static_cast<std::uint32_t>(X.rows()));
    put_be32(out, static_cast<std::uint32_t>(shape.height));
    put_be32(out, static_cast<std::uint32_t>(shape.width));
    for (double v : X.values()) out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    write_file_atomic(path, out);
}

void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels) {
    std::string out;
    put_be32(out, kIdxLabelsMagic);
    put_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 255) throw ArgumentError("save_idx_labels: label outside a byte");
        out.push_back(static_cast<char>(l));
    }
    write_file_atomic(path, out);
}

Dataset load_usps(const std::filesystem::path& path) {
    const auto b = read_all(path);
    if (b.size() < 12) throw IoError(path.string() + ": truncated USPS header");
    const std::uint32_t magic = read_le32(b, 0);
    if (magic != kUspsMagic) throw FormatError(path.string() + ": bad USPS magic " + hex(magic));
    const std::size_t n = read_le32(b, 4);
    const std::size_t d = read_le32(b, 8);
    const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
    if (side * side != d) throw FormatError(path.string() + ": dimension is not a square image");
    const std::size_t payload = 12 + 4 * n * d;
    if (b.size() < payload) throw IoError(path.string() + ": truncated USPS payload");

    Dataset ds;
    ds.name = path.stem().string();
    ds.shape = {side, side};
    ds.X = Matrix(n, d);
    auto x = ds.X.values();
    for (std::size_t i = 0; i < n * d; ++i) {
        const std::uint32_t bits = read_le32(b, 12 + 4 * i);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) throw FormatError(path.string() + ": non-finite pixel");
        x[i] = static_cast<double>(f);
    }
    if (!x.empty()) {
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        const double mn = *lo, mx = *hi;
        if (mn < 0.0 || mx > 1.0) {
            const double range = mx - mn;
            for (double& v : x) v = range > 0.0 ? (v - mn) / range : 0.0;
        }
    }
    if (b.size() >= payload + 4 * n && n > 0) {
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(read_le32(b, payload + 4 * i));
        ds.labels = std::move(labels);
    }
    return ds;
}

void save_usps(const std::filesystem::path& path, const Matrix& X, std::span<const int> labels) {
    if (!labels.empty() && labels.size() != X.rows()) throw ConsistencyError("save_usps: label count mismatch");
    std::string out;
    out.reserve(12 + 4 * X.size() + 4 * labels.size());
    put_le32(out, kUspsMagic);
    put_le32(out, static_cast<std::uint32_t>(X.rows()));
    put_le32(out, static_cast<std::uint32_t>(X.cols()));
    for (double v : X.values()) put_le32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    for (int l : labels) put_le32(out, static_cast<std::uint32_t>(l));
    write_file_atomic(path, out);
}

Dataset load_dataset(const std::filesystem::path& data, const std::optional<std::filesystem::path>& labels) {
    std::ifstream in(data, std::ios::binary);
    if (!in) throw IoError("cannot open " + data.string());
    unsigned char head[4] = {};
    in.read(reinterpret_cast<char*>(head), 4);
    if (in.gcount() != 4) throw IoError(data.string() + ": truncated header");
    const std::vector<unsigned char> h(head, head + 4);
    if (read_le32(h, 0) == kUspsMagic) {
        Dataset ds = load_usps(data);
        if (labels) {
            ds.labels = load_idx_labels(*labels);
            if (ds.labels->size() != ds.size()) throw ConsistencyError("USPS sample count differs from label count");
        }
        return ds;
    }
    return load_idx(data, labels);
}

void AugmentConfig::validate() const {
    if (!(max_shift_fraction >= 0.0 && max_shift_fraction <= 0.25))
        throw ArgumentError("augment: max_shift_fraction must lie in [0, 0.25]");
    if (!(max_rotation_degrees >= 0.0 && max_rotation_degrees <= 30.0))
        throw ArgumentError("augment: max_rotation_degrees must lie in [0, 30]");
}

void transform_image(std::span<const double> src, std::span<double> dst, ImageShape shape, int dx, int dy,
                     double degrees) {
    const std::size_t h = shape.height, w = shape.width;
    const double theta = degrees * std::numbers::pi / 180.0;
    double c = std::cos(theta), s = std::sin(theta);
    // Snap so right angles map grid points exactly onto grid points.
    if (std::abs(c) < 1e-12) c = 0.0;
    if (std::abs(s) < 1e-12) s = 0.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    auto at = [&](long r, long col) -> double {
        if (r < 0 || col < 0 || r >= static_cast<long>(h) || col >= static_cast<long>(w)) return 0.0;
        return src[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(col)];
    };
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
            // Undo the translation, then the rotation.
            const double y = static_cast<double>(r) - dy - cy;
            const double x = static_cast<double>(col) - dx - cx;
            const double sx = c * x - s * y + cx;
            const double sy = s * x + c * y + cy;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
            double v = (1 - ay) * ((1 - ax) * at(y0, x0) + (ax > 0 ? ax * at(y0, x0 + 1) : 0.0));
            if (ay > 0) v += ay * ((1 - ax) * at(y0 + 1, x0) + (ax > 0 ? ax * at(y0 + 1, x0 + 1) : 0.0));
            dst[r * w + col] = std::clamp(v, 0.0, 1.0);
        }
    }
}

Matrix augment(const Matrix& batch, ImageShape shape, const AugmentConfig& cfg, Rng& rng) {
    if (!cfg.enabled) return batch;
    if (shape.pixels() != batch.cols()) throw DimensionError("augment: image shape does not match batch columns");
    cfg.validate();
    const long max_dx = std::lround(cfg.max_shift_fraction * static_cast<double>(shape.width));
    const long max_dy = std::lround(cfg.max_shift_fraction * static_cast<double>(shape.height));
    Matrix out(batch.rows(), batch.cols());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        const int dx = static_cast<int>(rng.between(-max_dx, max_dx));
        const int dy = static_cast<int>(rng.between(-max_dy, max_dy));
        const double angle = rng.uniform(-cfg.max_rotation_degrees, cfg.max_rotation_degrees);
        transform_image(batch.row(i), out.row(i), shape, dx, dy, angle);
    }
    return out;
}

std::vector<std::vector<std::size_t>> epoch_chunks(std::size_t n, std::size_t batch_size, Rng& rng) {
    if (n == 0) throw ArgumentError("epoch_chunks: empty dataset");
    if (batch_size == 0) throw ArgumentError("epoch_chunks: batch size must be at least 1");
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        chunks.emplace_back(perm.begin() + static_cast<long>(start), perm.begin() + static_cast<long>(end));
    }
    return chunks;
}

BatchIterator::BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed) {
    if (n == 0) throw ArgumentError("BatchIterator: empty dataset");
    if (batch_size == 0) throw ArgumentError("BatchIterator: batch size must be at least 1");
    reshuffle();
}

void BatchIterator::reshuffle() {
    order_ = rng_.permutation(n_);
    cursor_ = 0;
}

std::vector<std::size_t> BatchIterator::next_indices() {
    if (cursor_ >= n_) {
        reshuffle();
        ++epoch_;
    }
    const std::size_t end = std::min(n_, cursor_ + batch_size_);
    std::vector<std::size_t> idx(order_.begin() + static_cast<long>(cursor_), order_.begin() + static_cast<long>(end));
    cursor_ = end;
    return idx;
}

Batch BatchIterator::next(const Matrix& X) {
    Batch b;
    b.indices = next_indices();
    b.X = gather_rows(X, b.indices);
    return b;
}

BatchIterator::State BatchIterator::save() const { return {rng_.state(), order_, cursor_, epoch_}; }

void BatchIterator::restore(const State& s) {
    if (s.order.size() != n_ || s.cursor > n_) throw ConsistencyError("BatchIterator: state belongs to another dataset");
    rng_.restore(s.rng);
    order_ = s.order;
    cursor_ = s.cursor;
    epoch_ = s.epoch;
}

}  // namespace dynae
