#include "sfwc/harness/experiment.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/optim/steps.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace sfwc {

namespace fs = std::filesystem;

DataSplits build_datasets(const DatasetConfig &c) {
    DataSplits out;
    if (c.kind == "idx") {
        out.train = load_idx_dataset(c.train_images, c.train_labels, c.n_train);
        if (!c.test_images.empty()) {
            out.test = load_idx_dataset(c.test_images, c.test_labels, c.n_test);
        } else {
            throw Error(Errc::ConfigError, "dataset: idx needs test_images and test_labels");
        }
        out.test.split = Split::Test;
        return out;
    }
    const std::size_t total = c.n_train + c.n_test;
    Dataset all;
    if (c.kind == "two_moons")
        all = make_two_moons(c.seed, total, c.noise);
    else if (c.kind == "blobs")
        all = make_blobs(c.seed, total, c.classes, c.features, c.cluster_std, c.center_box);
    else if (c.kind == "bars")
        all = make_bars(c.seed, total, c.classes, c.image_size, c.noise);
    else
        throw Error(Errc::ConfigError, "dataset.kind: unknown kind '" + c.kind + "'");
    auto [train, test] = split_dataset(all, c.n_train);
    out.train = std::move(train);
    out.test = std::move(test);
    return out;
}

Model build_model(const ModelConfig &c, const Dataset &train) {
    const Shape sample = train.sample_shape();
    if (c.kind == "mlp")
        return make_mlp(sample, c.hidden, train.classes, c.batchnorm);
    if (sample.size() != 3)
        throw Error(Errc::ConfigError, "model: a cnn needs (channels, height, width) samples, got " +
                                           shape_string(sample));
    return make_cnn(sample, c.channels, c.kernel, train.classes, c.batchnorm);
}

namespace {

struct WeightLayer {
    std::size_t layer = 0;
    std::size_t param = 0;
    LayerKind kind = LayerKind::Dense;
};

std::vector<WeightLayer> weight_layers(const Model &model) {
    std::vector<WeightLayer> out;
    std::size_t param = 0;
    const auto &layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_weight())
            out.push_back({i, param, layers[i].kind});
        param += layers[i].params.size();
    }
    return out;
}

bool matches(const std::string &match, const std::vector<std::size_t> &explicit_layers, std::size_t ordinal,
             LayerKind kind) {
    if (!explicit_layers.empty())
        return std::find(explicit_layers.begin(), explicit_layers.end(), ordinal) != explicit_layers.end();
    if (match == "dense")
        return kind == LayerKind::Dense;
    if (match == "conv")
        return kind == LayerKind::Conv2d;
    return true;
}

/// Filters of a conv weight, output rows of a dense weight.
GroupPartition row_groups(const Shape &shape) { return contiguous_groups(shape[0], fan_in(shape)); }

std::size_t region_dimension(RegionKind kind, const Shape &shape) {
    switch (kind) {
    case RegionKind::GroupKSupport:
        return shape[0];
    case RegionKind::SpectralKSupport:
        return std::min(shape[0], fan_in(shape));
    default:
        return shape_size(shape);
    }
}

FeasibleRegion make_region(RegionKind kind, const Shape &shape, std::size_t k, double tau) {
    switch (kind) {
    case RegionKind::L2Ball:
        return FeasibleRegion::l2_ball(shape, tau);
    case RegionKind::KSparsePolytope:
        return FeasibleRegion::k_sparse_polytope(shape, k, tau);
    case RegionKind::KSupport:
        return FeasibleRegion::k_support(shape, k, tau);
    case RegionKind::GroupKSupport:
        return FeasibleRegion::group_k_support(shape, row_groups(shape), k, tau);
    case RegionKind::SpectralKSupport:
        return FeasibleRegion::spectral_k_support(shape, k, tau);
    }
    throw Error(Errc::ConfigError, "unknown region kind");
}

std::string csv_line(std::initializer_list<std::string> fields) {
    std::string line;
    for (const auto &f : fields) {
        if (!line.empty())
            line += ',';
        line += f;
    }
    return line;
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double to_double(const std::string &s) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw Error(Errc::IoError, "bad number '" + s + "'");
    return v;
}

std::size_t to_size(const std::string &s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception &) {
        pos = std::string::npos;
    }
    if (s.empty() || pos != s.size())
        throw Error(Errc::IoError, "bad integer '" + s + "'");
    return static_cast<std::size_t>(v);
}

std::vector<std::vector<std::string>> read_rows(std::istream &in, std::string_view header, std::size_t width) {
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw Error(Errc::IoError, "expected CSV header '" + std::string(header) + "'");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto fields = split_csv(line);
        if (fields.size() != width)
            throw Error(Errc::IoError, "CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                                           std::to_string(width));
        rows.push_back(std::move(fields));
    }
    return rows;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(Errc::IoError, "cannot write " + path.string());
    out << text;
    if (!out)
        throw Error(Errc::IoError, "write failed for " + path.string());
}

std::string seed_file(const char *stem, std::uint64_t seed, const char *ext) {
    return std::string(stem) + "_seed" + std::to_string(seed) + ext;
}

} // namespace

std::vector<ConstrainedGroup> build_regions(const ExperimentConfig &config, const Model &model, std::uint64_t seed) {
    std::vector<ConstrainedGroup> groups;
    const auto weights = weight_layers(model);
    const auto params = model.parameters();
    for (std::size_t ordinal = 0; ordinal < weights.size(); ++ordinal) {
        const auto &wl = weights[ordinal];
        std::optional<std::size_t> entry;
        for (std::size_t e = 0; e < config.regions.size(); ++e) {
            const auto &rc = config.regions[e];
            if (!matches(rc.match, rc.layers, ordinal, wl.kind))
                continue;
            if (entry)
                throw Error(Errc::ConfigError, "weight layer " + std::to_string(ordinal) + " matches region entries " +
                                                   std::to_string(*entry) + " and " + std::to_string(e));
            entry = e;
        }
        if (!entry)
            continue;
        const auto &rc = config.regions[*entry];
        const Shape &shape = params[wl.param]->value.shape();
        const std::size_t k = resolve_k(rc.k_fraction, region_dimension(rc.kind, shape));
        ConstrainedGroup g;
        g.weight_layer = ordinal;
        g.layer = wl.layer;
        g.param = wl.param;
        g.entry = *entry;
        if (rc.tau) {
            g.region = make_region(rc.kind, shape, k, *rc.tau);
            g.radius.w = 0.0;
            g.radius.init_norm = 0.0;
            g.radius.tau = *rc.tau;
            g.radius.diameter = g.region.diameter();
        } else {
            const RngStream stream(seed, RngPurpose::Init, 1 + ordinal);
            const double init_norm = estimate_init_norm(shape, InitScheme::FanInGaussian, rc.init_samples, stream);
            g.radius = make_radius_spec(rc.kind, *rc.w, init_norm, k);
            g.region = make_region(rc.kind, shape, k, g.radius.tau);
        }
        groups.push_back(std::move(g));
    }
    for (const auto &rc : config.regions)
        for (std::size_t l : rc.layers)
            if (l >= weights.size())
                throw Error(Errc::ConfigError, "region layer " + std::to_string(l) + " does not exist (model has " +
                                                   std::to_string(weights.size()) + " weight layers)");
    return groups;
}

std::vector<std::size_t> penalty_layers(const ExperimentConfig &config, const Model &model) {
    std::vector<std::size_t> out;
    const auto weights = weight_layers(model);
    for (std::size_t ordinal = 0; ordinal < weights.size(); ++ordinal)
        if (matches(config.optimizer.penalty_match, {}, ordinal, weights[ordinal].kind))
            out.push_back(ordinal);
    return out;
}

void write_metrics_csv(std::ostream &out, std::span<const MetricsRow> rows) {
    out << kMetricsHeader << '\n';
    for (const auto &r : rows)
        out << csv_line({std::to_string(r.epoch), format_number(r.train_loss), format_number(r.train_acc),
                         format_number(r.test_acc), format_number(r.grad_norm_mean), format_number(r.eff_lr_mean),
                         format_number(r.wall_s)})
            << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream &in) {
    std::vector<MetricsRow> out;
    for (const auto &f : read_rows(in, kMetricsHeader, 7))
        out.push_back({to_size(f[0]), to_double(f[1]), to_double(f[2]), to_double(f[3]), to_double(f[4]),
                       to_double(f[5]), to_double(f[6])});
    return out;
}

void write_trace_csv(std::ostream &out, std::span<const TraceRow> rows) {
    out << kTraceHeader << '\n';
    for (const auto &r : rows)
        out << csv_line({std::to_string(r.epoch), std::to_string(r.step), std::to_string(r.group),
                         format_number(r.eta), format_number(r.grad_norm), format_number(r.dir_norm),
                         format_number(r.eff_lr), r.skipped ? "1" : "0"})
            << '\n';
}

std::vector<TraceRow> read_trace_csv(std::istream &in) {
    std::vector<TraceRow> out;
    for (const auto &f : read_rows(in, kTraceHeader, 8))
        out.push_back({to_size(f[0]), to_size(f[1]), to_size(f[2]), to_double(f[3]), to_double(f[4]),
                       to_double(f[5]), to_double(f[6]), f[7] == "1"});
    return out;
}

SeedRun run_seed(const ExperimentConfig &config, std::uint64_t seed) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();

    SeedRun run;
    run.config_id = config.id;
    run.method = config.label();
    run.seed = seed;

    const DataSplits data = build_datasets(config.dataset);
    Model model = build_model(config.model, data.train);
    model.initialize(RngStream(seed, RngPurpose::Init));

    const Method method = config.optimizer.settings.method;
    if (method == Method::Sfw)
        run.groups = build_regions(config, model, seed);

    std::vector<std::ptrdiff_t> group_of;
    std::vector<bool> penalised;
    {
        const auto params = model.parameters();
        group_of.assign(params.size(), -1);
        penalised.assign(params.size(), false);
        for (std::size_t g = 0; g < run.groups.size(); ++g) {
            auto &p = *params[run.groups[g].param];
            p.value = ensure_feasible(run.groups[g].region, p.value);
            group_of[run.groups[g].param] = static_cast<std::ptrdiff_t>(g);
        }
        if (method == Method::SgdGroupPenalty || method == Method::SgdNuclear || method == Method::ProxGd) {
            const auto weights = weight_layers(model);
            for (std::size_t ordinal : penalty_layers(config, model))
                penalised[weights[ordinal].param] = true;
        }
    }

    const std::size_t n = data.train.size();
    const std::size_t batch = std::min(config.run.batch_size, n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;

    OptimizerState state;
    state.settings = config.optimizer.settings;
    state.settings.horizon = config.run.epochs * steps_per_epoch;
    std::vector<Tensor> sgd_buffers(group_of.size());

    const auto check_gauges = [&]() {
        const auto params = model.parameters();
        for (const auto &g : run.groups)
            run.max_gauge_ratio =
                std::max(run.max_gauge_ratio, gauge(g.region, params[g.param]->value) / g.region.tau());
    };
    check_gauges();

    std::size_t epoch = 0;
    try {
        for (epoch = 1; epoch <= config.run.epochs; ++epoch) {
            const auto order = RngStream(seed, RngPurpose::Shuffle, epoch).permutation(n);
            double grad_norm_sum = 0.0, eff_lr_sum = 0.0;
            std::size_t eff_lr_count = 0;
            for (std::size_t s = 0; s < steps_per_epoch; ++s) {
                const std::size_t lo = s * batch, hi = std::min(n, lo + batch);
                const std::span<const std::size_t> index(order.data() + lo, hi - lo);
                std::vector<std::size_t> labels;
                labels.reserve(index.size());
                for (std::size_t i : index)
                    labels.push_back(data.train.labels[i]);
                const Tensor x = gather_rows(data.train.inputs, index);
                const Evaluation eval = model.evaluate(x, labels, true);

                double g2 = 0.0;
                for (const auto &g : eval.grads)
                    g2 += dot(g, g);
                grad_norm_sum += std::sqrt(g2);

                const double lr = lr_schedule(state.settings.schedule, state.t, state.settings.horizon,
                                              state.settings.eta0);
                const auto params = model.parameters();
                for (std::size_t pi = 0; pi < params.size(); ++pi) {
                    Tensor &theta = params[pi]->value;
                    const Tensor &grad = eval.grads[pi];
                    if (group_of[pi] >= 0) {
                        const auto g = static_cast<std::size_t>(group_of[pi]);
                        SfwStepResult r = sfw_step(state, g, theta, run.groups[g].region, grad);
                        if (!r.skipped) {
                            eff_lr_sum += r.eff_lr;
                            ++eff_lr_count;
                        }
                        if (config.run.trace)
                            run.trace.push_back({epoch, state.t, g, r.eta, r.grad_norm, r.dir_norm, r.eff_lr,
                                                 r.skipped});
                        theta = std::move(r.theta);
                        continue;
                    }
                    Tensor direction = grad;
                    if (penalised[pi] && method == Method::SgdGroupPenalty)
                        direction += group_penalty_grad(theta, row_groups(theta.shape()), state.settings.penalty);
                    if (penalised[pi] && method == Method::SgdNuclear)
                        direction += nuclear_subgradient(theta, state.settings.penalty);
                    theta = sgd_step(theta, direction, lr, state.settings.weight_decay, sgd_buffers[pi],
                                     state.settings.momentum, state.t);
                    if (penalised[pi] && method == Method::ProxGd)
                        theta = svt(theta, lr * state.settings.penalty);
                }
                if (method != Method::Sfw) {
                    eff_lr_sum += lr;
                    ++eff_lr_count;
                }
                ++state.t;
            }

            MetricsRow row;
            row.epoch = epoch;
            const Evaluation train_eval = model.evaluate(data.train.inputs, data.train.labels, false);
            row.train_loss = train_eval.loss;
            row.train_acc = train_eval.accuracy;
            row.test_acc = data.test.size() ? model.evaluate(data.test.inputs, data.test.labels, false).accuracy : 0.0;
            row.grad_norm_mean = grad_norm_sum / static_cast<double>(steps_per_epoch);
            row.eff_lr_mean = eff_lr_count ? eff_lr_sum / static_cast<double>(eff_lr_count) : 0.0;
            if (config.run.wall_time)
                row.wall_s = std::chrono::duration<double>(Clock::now() - started).count();
            run.metrics.push_back(row);
            check_gauges();
        }
    } catch (const Error &e) {
        if (e.code() != Errc::NonFiniteLoss)
            throw;
        run.failure = RunFailure{std::string(errc_name(e.code())), e.what(), epoch, state.t};
    }
    run.steps = state.t;
    run.model = std::move(model);
    if (run.failure)
        return run;

    run.dense_train_acc = run.metrics.empty() ? 0.0 : run.metrics.back().train_acc;
    run.dense_test_acc = run.metrics.empty() ? 0.0 : run.metrics.back().test_acc;

    const Dataset &eval_set = config.compression.metric == "train_acc" ? data.train : data.test;
    const ModelEvaluator evaluator = [&eval_set](const Model &m) {
        return m.evaluate(eval_set.inputs, eval_set.labels, false).accuracy;
    };
    run.tradeoff = sweep(run.model, config.compression.method, config.compression.targets, evaluator, run.method,
                         config.id, seed);
    return run;
}

Json seed_summary(const SeedRun &run) {
    Json j;
    j["config_id"] = run.config_id;
    j["method"] = run.method;
    j["seed"] = run.seed;
    j["steps"] = run.steps;
    j["dense_train_acc"] = run.dense_train_acc;
    j["dense_test_acc"] = run.dense_test_acc;
    j["max_gauge_ratio"] = run.max_gauge_ratio;
    j["feasible"] = run.feasible();
    j["parameters"] = run.model.parameter_count();
    j["prunable"] = run.model.prunable_count();
    Json groups = Json::array();
    for (const auto &g : run.groups)
        groups.push_back({{"weight_layer", g.weight_layer},
                          {"region", std::string(region_kind_name(g.region.kind()))},
                          {"k", g.region.k()},
                          {"tau", g.region.tau()},
                          {"diameter", g.region.diameter()},
                          {"w", g.radius.w},
                          {"init_norm", g.radius.init_norm}});
    j["regions"] = groups;
    if (run.failure)
        j["failure"] = {{"error", run.failure->error},
                        {"message", run.failure->message},
                        {"epoch", run.failure->epoch},
                        {"step", run.failure->step}};
    return j;
}

std::vector<NamedTensor> model_tensors(const Model &model) {
    std::vector<NamedTensor> out;
    const auto &layers = model.layers();
    for (std::size_t i = 0; i < layers.size(); ++i)
        for (const auto &p : layers[i].params)
            out.push_back({std::to_string(i) + "." + std::string(layer_kind_name(layers[i].kind)) + "." + p.name,
                           p.value});
    return out;
}

namespace {

constexpr char kSnapshotMagic[8] = {'S', 'F', 'W', 'C', 'S', 'N', 'P', '1'};

void put_le(std::string &buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b)
        buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_le(const unsigned char *p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

} // namespace

void write_snapshot(const fs::path &bin, const fs::path &manifest, std::span<const NamedTensor> tensors) {
    std::string buf(kSnapshotMagic, sizeof kSnapshotMagic);
    Json entries = Json::array();
    std::size_t offset = 0;
    for (const auto &t : tensors) {
        entries.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}});
        for (double v : t.value.data())
            put_le(buf, v);
        offset += t.value.size();
    }
    write_text(bin, buf);
    Json m;
    m["format"] = "sfwc-snapshot";
    m["version"] = 1;
    m["dtype"] = "float64-le";
    m["header_bytes"] = sizeof kSnapshotMagic;
    m["values"] = offset;
    m["tensors"] = entries;
    write_text(manifest, m.dump(2) + "\n");
}

std::vector<NamedTensor> read_snapshot(const fs::path &bin, const fs::path &manifest) {
    std::ifstream min(manifest);
    if (!min)
        throw Error(Errc::IoError, "cannot open " + manifest.string());
    Json m;
    try {
        m = Json::parse(min);
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::IoError, manifest.string() + ": " + e.what());
    }
    std::ifstream bin_in(bin, std::ios::binary);
    if (!bin_in)
        throw Error(Errc::IoError, "cannot open " + bin.string());
    const std::string bytes((std::istreambuf_iterator<char>(bin_in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof kSnapshotMagic || std::memcmp(bytes.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0)
        throw Error(Errc::UnknownMagic, bin.string() + " is not a snapshot");
    const std::size_t values = m.at("values").get<std::size_t>();
    if (bytes.size() != sizeof kSnapshotMagic + 8 * values)
        throw Error(Errc::TruncatedPayload, bin.string() + " holds " + std::to_string(bytes.size()) +
                                                " bytes, manifest expects " +
                                                std::to_string(sizeof kSnapshotMagic + 8 * values));
    const auto *base = reinterpret_cast<const unsigned char *>(bytes.data()) + sizeof kSnapshotMagic;
    std::vector<NamedTensor> out;
    for (const auto &e : m.at("tensors")) {
        const Shape shape = e.at("shape").get<Shape>();
        const std::size_t offset = e.at("offset").get<std::size_t>();
        const std::size_t count = shape_size(shape);
        if (offset + count > values)
            throw Error(Errc::TruncatedPayload, "tensor " + e.at("name").get<std::string>() + " runs past the payload");
        std::vector<double> data(count);
        for (std::size_t i = 0; i < count; ++i)
            data[i] = get_le(base + 8 * (offset + i));
        out.push_back({e.at("name").get<std::string>(), Tensor(shape, std::move(data))});
    }
    return out;
}

void write_seed_outputs(const fs::path &dir, const SeedRun &run) {
    fs::create_directories(dir);
    {
        std::ostringstream s;
        write_metrics_csv(s, run.metrics);
        write_text(dir / seed_file("metrics", run.seed, ".csv"), s.str());
    }
    if (!run.trace.empty()) {
        std::ostringstream s;
        write_trace_csv(s, run.trace);
        write_text(dir / seed_file("trace", run.seed, ".csv"), s.str());
    }
    write_text(dir / seed_file("summary", run.seed, ".json"), seed_summary(run).dump(2) + "\n");
    const auto tensors = model_tensors(run.model);
    write_snapshot(dir / seed_file("snapshot", run.seed, ".bin"), dir / seed_file("snapshot", run.seed, ".json"),
                   tensors);
    const fs::path error_file = dir / seed_file("error", run.seed, ".json");
    if (run.failure) {
        Json e = {{"error", run.failure->error},
                  {"message", run.failure->message},
                  {"config_id", run.config_id},
                  {"seed", run.seed},
                  {"epoch", run.failure->epoch},
                  {"step", run.failure->step}};
        write_text(error_file, e.dump(2) + "\n");
    } else {
        fs::remove(error_file);
    }
}

void write_cell_tradeoff(const fs::path &dir, std::span<const SeedRun> runs) {
    std::vector<TradeoffRecord> rows;
    for (const auto &r : runs)
        rows.insert(rows.end(), r.tradeoff.begin(), r.tradeoff.end());
    std::ostringstream s;
    write_tradeoff_csv(s, rows);
    write_text(dir / "tradeoff.csv", s.str());
}

bool ExperimentResult::ok() const {
    return std::none_of(runs.begin(), runs.end(), [](const SeedRun &r) { return r.failure.has_value(); });
}

namespace {

void finish_cell(ExperimentResult &result, const ExperimentConfig &config) {
    fs::create_directories(result.dir);
    write_text(result.dir / "config.json", config.raw.dump(2) + "\n");
    for (const auto &r : result.runs)
        write_seed_outputs(result.dir, r);
    write_cell_tradeoff(result.dir, result.runs);
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig &config, const fs::path &out,
                                std::span<const std::uint64_t> seeds) {
    ExperimentResult result;
    result.dir = out / config.id;
    const std::vector<std::uint64_t> chosen =
        seeds.empty() ? config.run.seeds : std::vector<std::uint64_t>(seeds.begin(), seeds.end());
    for (std::uint64_t s : chosen)
        result.runs.push_back(run_seed(config, s));
    finish_cell(result, config);
    return result;
}

std::vector<ExperimentResult> run_sweep(const Json &doc, const fs::path &out, std::span<const std::uint64_t> seeds,
                                        std::size_t threads) {
    std::vector<ExperimentConfig> configs;
    for (const auto &cell : expand_grid(doc))
        configs.push_back(parse_config(cell.doc));

    struct Job {
        std::size_t cell;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    std::vector<ExperimentResult> results(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
        results[c].dir = out / configs[c].id;
        const auto &cs = seeds.empty() ? configs[c].run.seeds : std::vector<std::uint64_t>(seeds.begin(), seeds.end());
        results[c].runs.resize(cs.size());
        for (std::uint64_t s : cs)
            jobs.push_back({c, s});
    }

    std::vector<std::size_t> slot(jobs.size());
    {
        std::vector<std::size_t> next(configs.size(), 0);
        for (std::size_t j = 0; j < jobs.size(); ++j)
            slot[j] = next[jobs[j].cell]++;
    }

    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto worker = [&]() {
        for (;;) {
            const std::size_t j = cursor.fetch_add(1);
            if (j >= jobs.size())
                return;
            try {
                results[jobs[j].cell].runs[slot[j]] = run_seed(configs[jobs[j].cell], jobs[j].seed);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }
    if (first_error)
        std::rethrow_exception(first_error);

    for (std::size_t c = 0; c < configs.size(); ++c)
        finish_cell(results[c], configs[c]);
    return results;
}

} // namespace sfwc
