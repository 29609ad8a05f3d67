#include "sfwc/compress/compress.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/numerics/linalg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

namespace sfwc {

std::string_view compression_name(CompressionMethod m) noexcept {
    switch (m) {
    case CompressionMethod::Magnitude: return "magnitude";
    case CompressionMethod::Filter: return "filter";
    case CompressionMethod::LowRank: return "lowrank";
    }
    return "unknown";
}

std::optional<CompressionMethod> parse_compression(std::string_view name) noexcept {
    for (auto m : {CompressionMethod::Magnitude, CompressionMethod::Filter, CompressionMethod::LowRank})
        if (compression_name(m) == name)
            return m;
    return std::nullopt;
}

std::size_t budget_count(double fraction, std::size_t total) {
    if (!(fraction >= 0.0) || fraction > 1.0)
        throw Error(Errc::ConfigError, "compression target must lie in [0, 1]");
    const double raw = fraction * static_cast<double>(total);
    const auto n = static_cast<std::size_t>(std::floor(raw + 1e-9 * std::max(1.0, raw)));
    return std::min(n, total);
}

namespace {

std::size_t count_prunable_zeros(const Model &model) {
    std::size_t z = 0;
    for (const auto *p : model.parameters())
        if (p->prunable)
            z += count_zeros(p->value);
    return z;
}

} // namespace

Compressed magnitude_prune_global(const Model &model, double sparsity) {
    Compressed out{model, {}};
    auto &rep = out.report;
    struct Entry {
        double mag;
        std::size_t layer, param, index;
    };
    std::vector<Entry> entries;
    auto &layers = out.model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        LayerSparsity ls{li, 0, 0, 0};
        for (std::size_t pi = 0; pi < layers[li].params.size(); ++pi) {
            const auto &p = layers[li].params[pi];
            if (!p.prunable)
                continue;
            ls.total += p.value.size();
            for (std::size_t i = 0; i < p.value.size(); ++i)
                entries.push_back({std::abs(p.value[i]), li, pi, i});
        }
        if (ls.total)
            rep.layers.push_back(ls);
    }
    rep.prunable_total = entries.size();
    rep.params_before = model.parameter_count();
    rep.selected = budget_count(sparsity, rep.prunable_total);
    auto before = [](const Entry &a, const Entry &b) {
        return std::tie(a.mag, a.layer, a.param, a.index) < std::tie(b.mag, b.layer, b.param, b.index);
    };
    if (rep.selected < entries.size())
        std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(rep.selected), entries.end(),
                         before);
    for (std::size_t e = 0; e < rep.selected; ++e)
        layers[entries[e].layer].params[entries[e].param].value[entries[e].index] = 0.0;

    for (auto &ls : rep.layers) {
        ls.zeroed = 0;
        for (const auto &p : layers[ls.layer].params)
            if (p.prunable)
                ls.zeroed += count_zeros(p.value);
    }
    rep.zeros = count_prunable_zeros(out.model);
    rep.achieved = rep.prunable_total ? static_cast<double>(rep.zeros) / static_cast<double>(rep.prunable_total) : 0.0;
    rep.params_after = rep.params_before - rep.zeros;
    return out;
}

Compressed filter_prune_local(const Model &model, double fraction) {
    if (!(fraction >= 0.0) || !(fraction < 1.0))
        throw Error(Errc::ConfigError, "filter fraction must lie in [0, 1)");
    Compressed out{model, {}};
    auto &rep = out.report;
    rep.params_before = model.parameter_count();
    std::size_t filters_total = 0, removed_weights = 0;
    auto &layers = out.model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        Layer &l = layers[li];
        if (l.kind != LayerKind::Conv2d || !l.weight().prunable)
            continue;
        Tensor &w = l.weight().value;
        const std::size_t n = l.out, per = w.size() / n;
        std::vector<double> l1(n, 0.0);
        for (std::size_t f = 0; f < n; ++f)
            for (std::size_t i = 0; i < per; ++i)
                l1[f] += std::abs(w[f * per + i]);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return l1[a] < l1[b]; });
        const std::size_t drop = budget_count(fraction, n);
        for (std::size_t r = 0; r < drop; ++r)
            std::fill_n(w.data().begin() + static_cast<std::ptrdiff_t>(order[r] * per), per, 0.0);
        rep.layers.push_back({li, n, drop, 0});
        filters_total += n;
        rep.selected += drop;
        removed_weights += drop * per;
    }
    rep.prunable_total = out.model.prunable_count();
    rep.zeros = count_prunable_zeros(out.model);
    rep.achieved = filters_total ? static_cast<double>(rep.selected) / static_cast<double>(filters_total) : 0.0;
    rep.params_after = rep.params_before - removed_weights;
    return out;
}

std::size_t rank_for_reduction(std::size_t n, std::size_t m, double reduction) {
    if (!(reduction >= 0.0) || !(reduction < 1.0))
        throw Error(Errc::ConfigError, "parameter reduction must lie in [0, 1)");
    const double raw = (1.0 - reduction) * static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
    const auto t = static_cast<std::size_t>(std::floor(raw + 1e-9 * std::max(1.0, raw)));
    return std::clamp<std::size_t>(t, 1, std::min(n, m));
}

RankSelection select_ranks(const Model &model, double reduction) {
    RankSelection sel;
    const auto &layers = model.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer &l = layers[li];
        if (l.kind != LayerKind::Conv2d)
            continue;
        const std::size_t n = l.out, m = l.in * l.kernel * l.kernel;
        const std::size_t t = rank_for_reduction(n, m, reduction);
        sel.layers.push_back(li);
        sel.ranks.push_back(t);
        sel.params_before += n * m;
        sel.params_after += t * (n + m);
    }
    sel.reduction = sel.params_before ? 1.0 - static_cast<double>(sel.params_after) /
                                                  static_cast<double>(sel.params_before)
                                      : 0.0;
    return sel;
}

std::pair<Layer, Layer> decompose_layer(const Layer &layer, std::size_t t) {
    if (!layer.has_weight())
        throw Error(Errc::ConfigError, "decompose_layer needs a dense or conv layer");
    const Tensor mat = matrix_view(layer.weight().value);
    const std::size_t n = mat.rows(), m = mat.cols();
    if (t < 1 || t > std::min(n, m))
        throw Error(Errc::RankOutOfRange,
                    "rank " + std::to_string(t) + " outside [1, " + std::to_string(std::min(n, m)) + "]");
    const SvdFactors f = svd_full(mat);
    Tensor first({t, m}), second({n, t});
    for (std::size_t p = 0; p < t; ++p) {
        for (std::size_t j = 0; j < m; ++j)
            first(p, j) = f.sigma[p] * f.v(j, p);
        for (std::size_t i = 0; i < n; ++i)
            second(i, p) = f.u(i, p);
    }
    const Parameter *bias = layer.bias();
    Layer a, b;
    if (layer.kind == LayerKind::Conv2d) {
        a = make_conv2d(layer.in, t, layer.kernel, false);
        b = make_conv2d(t, n, 1, bias != nullptr);
        a.weight().value = first.reshaped({t, layer.in, layer.kernel, layer.kernel});
        b.weight().value = second.reshaped({n, t, 1, 1});
    } else {
        a = make_dense(m, t, false);
        b = make_dense(t, n, bias != nullptr);
        a.weight().value = std::move(first);
        b.weight().value = std::move(second);
    }
    if (bias)
        b.bias()->value = bias->value;
    return {std::move(a), std::move(b)};
}

Compressed lowrank_compress(const Model &model, double reduction) {
    const RankSelection sel = select_ranks(model, reduction);
    Compressed out{model, {}};
    auto &rep = out.report;
    rep.params_before = model.parameter_count();
    rep.prunable_total = sel.params_before;
    if (reduction == 0.0) {
        rep.params_after = rep.params_before;
        for (std::size_t i = 0; i < sel.layers.size(); ++i) {
            const Layer &l = model.layers()[sel.layers[i]];
            rep.layers.push_back({sel.layers[i], l.weight().value.size(), 0, std::min(l.out, l.in * l.kernel * l.kernel)});
        }
        return out;
    }
    // Back to front so earlier indices stay valid.
    for (std::size_t i = sel.layers.size(); i-- > 0;) {
        const std::size_t li = sel.layers[i];
        auto [a, b] = decompose_layer(out.model.layers()[li], sel.ranks[i]);
        out.model.replace_layer(li, {std::move(a), std::move(b)});
    }
    for (std::size_t i = 0; i < sel.layers.size(); ++i) {
        const Layer &l = model.layers()[sel.layers[i]];
        rep.layers.push_back({sel.layers[i], l.weight().value.size(), 0, sel.ranks[i]});
    }
    rep.selected = sel.params_before - std::min(sel.params_before, sel.params_after);
    rep.achieved = sel.reduction;
    rep.params_after = out.model.parameter_count();
    rep.zeros = count_prunable_zeros(out.model);
    return out;
}

Compressed compress(const Model &model, CompressionMethod method, double target) {
    switch (method) {
    case CompressionMethod::Magnitude: return magnitude_prune_global(model, target);
    case CompressionMethod::Filter: return filter_prune_local(model, target);
    case CompressionMethod::LowRank: return lowrank_compress(model, target);
    }
    return {model, {}};
}

std::vector<TradeoffRecord> sweep(const Model &model, CompressionMethod method, std::span<const double> targets,
                                  const ModelEvaluator &evaluator, const std::string &method_label,
                                  const std::string &config_id, std::uint64_t seed) {
    if (!std::is_sorted(targets.begin(), targets.end()))
        throw Error(Errc::ConfigError, "sweep targets must be sorted ascending");
    const double pre = evaluator(model);
    std::vector<TradeoffRecord> records;
    records.reserve(targets.size());
    for (double target : targets) {
        const Compressed c = compress(model, method, target);
        records.push_back({method_label, config_id, seed, target, c.report.achieved, pre, evaluator(c.model)});
    }
    return records;
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_tradeoff_csv(std::ostream &out, std::span<const TradeoffRecord> records) {
    out << kTradeoffHeader << '\n';
    for (const auto &r : records)
        out << r.method << ',' << r.config_id << ',' << r.seed << ',' << format_number(r.target) << ','
            << format_number(r.achieved) << ',' << format_number(r.metric_pre) << ','
            << format_number(r.metric_post) << '\n';
}

std::vector<TradeoffRecord> read_tradeoff_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != kTradeoffHeader)
        throw Error(Errc::ConfigError, "tradeoff CSV header mismatch");
    std::vector<TradeoffRecord> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 7)
            throw Error(Errc::ConfigError, "tradeoff CSV row has " + std::to_string(cells.size()) + " fields");
        TradeoffRecord r;
        r.method = cells[0];
        r.config_id = cells[1];
        r.seed = std::stoull(cells[2]);
        r.target = std::stod(cells[3]);
        r.achieved = std::stod(cells[4]);
        r.metric_pre = std::stod(cells[5]);
        r.metric_post = std::stod(cells[6]);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace sfwc
