#include "sfwc/zoo/data.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/numerics/rng.hpp"
#include "sfwc/zoo/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace sfwc {

Shape Dataset::sample_shape() const {
    Shape s(inputs.shape().begin() + 1, inputs.shape().end());
    return s;
}

void Dataset::validate() const {
    if (inputs.rank() < 2 || inputs.shape()[0] != labels.size())
        throw Error(Errc::ShapeMismatch, "dataset inputs " + shape_string(inputs.shape()) + " vs " +
                                             std::to_string(labels.size()) + " labels");
    for (auto y : labels)
        if (y >= classes)
            throw Error(Errc::ConfigError, "label " + std::to_string(y) + " outside class count");
}

Dataset Dataset::subset(std::span<const std::size_t> index) const {
    Dataset d;
    d.inputs = gather_rows(inputs, index);
    d.labels.reserve(index.size());
    for (auto i : index)
        d.labels.push_back(labels[i]);
    d.classes = classes;
    d.split = split;
    return d;
}

namespace {

Dataset shuffled(Tensor inputs, std::vector<std::size_t> labels, std::size_t classes, RngStream &rng) {
    Dataset raw{std::move(inputs), std::move(labels), classes, Split::Train};
    const auto perm = rng.permutation(raw.size());
    return raw.subset(perm);
}

} // namespace

Dataset make_two_moons(std::uint64_t seed, std::size_t n, double noise) {
    RngStream rng(seed, RngPurpose::Data);
    const std::size_t n_outer = (n + 1) / 2, n_inner = n - n_outer;
    Tensor x({n, 2});
    std::vector<std::size_t> y(n);
    auto angle = [](std::size_t i, std::size_t count) {
        return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
    };
    for (std::size_t i = 0; i < n_outer; ++i) {
        const double t = angle(i, n_outer);
        x(i, 0) = std::cos(t);
        x(i, 1) = std::sin(t);
        y[i] = 0;
    }
    for (std::size_t i = 0; i < n_inner; ++i) {
        const double t = angle(i, n_inner);
        x(n_outer + i, 0) = 1.0 - std::cos(t);
        x(n_outer + i, 1) = 0.5 - std::sin(t);
        y[n_outer + i] = 1;
    }
    if (noise > 0.0)
        for (auto &v : x.data())
            v += noise * rng.normal();
    return shuffled(std::move(x), std::move(y), 2, rng);
}

Dataset make_blobs(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t features, double cluster_std,
                   double center_box) {
    if (classes == 0 || features == 0)
        throw Error(Errc::ConfigError, "make_blobs needs at least one class and one feature");
    RngStream rng(seed, RngPurpose::Data);
    Tensor centers({classes, features});
    for (auto &v : centers.data())
        v = rng.uniform(-center_box, center_box);
    Tensor x({n, features});
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = i % classes;
        for (std::size_t f = 0; f < features; ++f)
            x(i, f) = centers(y[i], f) + cluster_std * rng.normal();
    }
    return shuffled(std::move(x), std::move(y), classes, rng);
}

Dataset make_bars(std::uint64_t seed, std::size_t n, std::size_t classes, std::size_t size, double noise) {
    if (classes < 1 || classes > 4 || size < 3)
        throw Error(Errc::ConfigError, "make_bars supports 1-4 classes and images of side >= 3");
    RngStream rng(seed, RngPurpose::Data);
    const std::size_t len = size - 1;
    Tensor x({n, 1, size, size});
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = i % classes;
        double *img = x.data().data() + i * size * size;
        for (std::size_t p = 0; p < size * size; ++p)
            img[p] = noise * rng.normal();
        const std::size_t r = rng.index(size);
        const std::size_t c = rng.index(size - len + 1);
        const std::size_t r2 = rng.index(size - len + 1);
        for (std::size_t j = 0; j < len; ++j) {
            std::size_t row = 0, col = 0;
            switch (y[i]) {
            case 0: row = r, col = c + j; break;
            case 1: row = c + j, col = r; break;
            case 2: row = r2 + j, col = c + j; break;
            default: row = r2 + j, col = c + len - 1 - j; break;
            }
            img[row * size + col] += 1.0;
        }
    }
    return shuffled(std::move(x), std::move(y), classes, rng);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset &all, std::size_t n_train) {
    if (n_train > all.size())
        throw Error(Errc::ConfigError, "train split larger than dataset");
    std::vector<std::size_t> train_idx(n_train), test_idx(all.size() - n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        train_idx[i] = i;
    for (std::size_t i = n_train; i < all.size(); ++i)
        test_idx[i - n_train] = i;
    Dataset train = all.subset(train_idx), test = all.subset(test_idx);
    train.split = Split::Train;
    test.split = Split::Test;
    return {std::move(train), std::move(test)};
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    if (offset + 4 > bytes.size())
        throw Error(Errc::TruncatedPayload, "IDX header ends early");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

} // namespace

IdxFile parse_idx(std::span<const std::uint8_t> bytes) {
    IdxFile f;
    f.magic = read_be32(bytes, 0);
    std::size_t ndims = 0;
    if (f.magic == kIdxImageMagic)
        ndims = 3;
    else if (f.magic == kIdxLabelMagic)
        ndims = 1;
    else
        throw Error(Errc::UnknownMagic, "IDX magic " + std::to_string(f.magic));
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        f.dims.push_back(read_be32(bytes, 4 + 4 * i));
        count *= f.dims.back();
    }
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header + count)
        throw Error(Errc::TruncatedPayload, "IDX payload has " + std::to_string(bytes.size() - header) +
                                                " bytes, expected " + std::to_string(count));
    const auto payload = bytes.subspan(header, count);
    if (ndims == 3) {
        f.images = Tensor({f.dims[0], f.dims[1], f.dims[2]});
        for (std::size_t i = 0; i < count; ++i)
            f.images[i] = static_cast<double>(payload[i]) / 255.0;
    } else {
        f.labels.assign(payload.begin(), payload.end());
    }
    return f;
}

IdxFile load_idx(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

Dataset load_idx_dataset(const std::filesystem::path &images, const std::filesystem::path &labels,
                         std::size_t limit) {
    const IdxFile img = load_idx(images);
    const IdxFile lab = load_idx(labels);
    if (img.magic != kIdxImageMagic || lab.magic != kIdxLabelMagic)
        throw Error(Errc::UnknownMagic, "expected an image file and a label file");
    std::size_t n = std::min<std::size_t>(img.dims[0], lab.labels.size());
    if (limit > 0)
        n = std::min(n, limit);
    Dataset d;
    const std::size_t pixels = std::size_t{img.dims[1]} * img.dims[2];
    std::vector<double> values(img.images.values().begin(),
                               img.images.values().begin() + static_cast<std::ptrdiff_t>(n * pixels));
    d.inputs = Tensor({n, 1, img.dims[1], img.dims[2]}, std::move(values));
    d.labels.assign(lab.labels.begin(), lab.labels.begin() + static_cast<std::ptrdiff_t>(n));
    d.classes = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1;
    d.validate();
    return d;
}

} // namespace sfwc
