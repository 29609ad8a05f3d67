#pragma once

#include "sfwc/numerics/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sfwc {

enum class Split { Train, Test };

struct Dataset {
    Tensor inputs; // (N, features...) batch-first
    std::vector<std::size_t> labels;
    std::size_t classes = 0;
    Split split = Split::Train;

    std::size_t size() const noexcept { return labels.size(); }
    Shape sample_shape() const;
    /// Throws ShapeMismatch / ConfigError when inputs and labels disagree.
    void validate() const;
    Dataset subset(std::span<const std::size_t> index) const;
};

/// Two interleaved half circles, n/2 (+1) points each, angles evenly spaced,
/// Gaussian noise of std `noise`, rows shuffled.
Dataset make_two_moons(std::uint64_t seed, std::size_t n, double noise);

/// Isotropic Gaussian clusters with centres drawn uniformly from
/// [-center_box, center_box]^features; labels assigned round-robin.
Dataset make_blobs(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t features = 2,
                   double cluster_std = 1.0, double center_box = 10.0);

/// Single-channel size x size images holding one bar of length size - 1 at a
/// random offset: horizontal, vertical, diagonal or anti-diagonal by class,
/// plus Gaussian pixel noise. Labels round-robin, rows shuffled.
Dataset make_bars(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t size = 8, double noise = 0.3);

/// First n_train rows become the train split, the rest the test split.
std::pair<Dataset, Dataset> split_dataset(const Dataset &all, std::size_t n_train);

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803; // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801; // 2049

struct IdxFile {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    /// Image files: (N, rows, cols) scaled to [0, 1]. Label files: empty.
    Tensor images;
    std::vector<std::size_t> labels;
};

/// Big-endian IDX (unsigned byte payload). Throws UnknownMagic or TruncatedPayload.
IdxFile parse_idx(std::span<const std::uint8_t> bytes);
IdxFile load_idx(const std::filesystem::path &path);
/// Pairs an image file with a label file; images become (N, 1, rows, cols).
/// `limit` > 0 keeps the first `limit` samples.
Dataset load_idx_dataset(const std::filesystem::path &images, const std::filesystem::path &labels,
                         std::size_t limit = 0);

} // namespace sfwc
