#include "sfwc/harness/config.hpp"

#include "sfwc/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace sfwc {

namespace {

[[noreturn]] void fail(const std::string &where, const std::string &what) {
    throw Error(Errc::ConfigError, where + ": " + what);
}

/// Reads members of one JSON object and rejects anything left unread.
class Block {
public:
    Block(const Json &doc, std::string where) : doc_(doc), where_(std::move(where)) {
        if (!doc_.is_object())
            fail(where_, "expected an object");
    }
    ~Block() noexcept(false) {
        if (std::uncaught_exceptions() == 0)
            for (const auto &[key, value] : doc_.items())
                if (!seen_.count(key))
                    fail(where_, "unknown key '" + key + "'");
    }
    Block(const Block &) = delete;
    Block &operator=(const Block &) = delete;

    bool has(const std::string &key) const { return doc_.contains(key); }

    const Json *find(const std::string &key) {
        seen_.insert(key);
        auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    template <class T> void get(const std::string &key, T &out) {
        if (const Json *v = find(key))
            out = convert<T>(*v, where_ + "." + key);
    }
    template <class T> void get(const std::string &key, std::optional<T> &out) {
        if (const Json *v = find(key))
            out = convert<T>(*v, where_ + "." + key);
    }

    template <class T> static T convert(const Json &v, const std::string &where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean())
                fail(where, "expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                fail(where, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
                fail(where, "expected a non-negative integer");
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number())
                fail(where, "expected a number");
            return v.get<T>();
        } else {
            if (!v.is_array())
                fail(where, "expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
            return out;
        }
    }

    const std::string &where() const { return where_; }

private:
    const Json &doc_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string &where, const std::string &what) {
    if (!ok)
        fail(where, what);
}

DatasetConfig parse_dataset(const Json &doc) {
    DatasetConfig d;
    Block b(doc, "dataset");
    b.get("kind", d.kind);
    b.get("n_train", d.n_train);
    b.get("n_test", d.n_test);
    b.get("noise", d.noise);
    b.get("seed", d.seed);
    b.get("classes", d.classes);
    b.get("features", d.features);
    b.get("cluster_std", d.cluster_std);
    b.get("center_box", d.center_box);
    b.get("image_size", d.image_size);
    b.get("train_images", d.train_images);
    b.get("train_labels", d.train_labels);
    b.get("test_images", d.test_images);
    b.get("test_labels", d.test_labels);
    require(d.kind == "two_moons" || d.kind == "blobs" || d.kind == "bars" || d.kind == "idx", "dataset.kind",
            "must be two_moons, blobs, bars or idx");
    require(d.n_train >= 1, "dataset.n_train", "must be at least 1");
    require(d.noise >= 0.0, "dataset.noise", "must be non-negative");
    require(d.classes >= 2, "dataset.classes", "must be at least 2");
    if (d.kind == "two_moons")
        require(d.classes == 2, "dataset.classes", "two_moons has exactly 2 classes");
    if (d.kind == "idx")
        require(!d.train_images.empty() && !d.train_labels.empty(), "dataset", "idx needs train_images and train_labels");
    return d;
}

ModelConfig parse_model(const Json &doc) {
    ModelConfig m;
    Block b(doc, "model");
    b.get("kind", m.kind);
    b.get("hidden", m.hidden);
    b.get("channels", m.channels);
    b.get("kernel", m.kernel);
    b.get("batchnorm", m.batchnorm);
    require(m.kind == "mlp" || m.kind == "cnn", "model.kind", "must be mlp or cnn");
    require(m.kernel % 2 == 1, "model.kernel", "must be odd");
    if (m.kind == "cnn")
        require(!m.channels.empty(), "model.channels", "a cnn needs at least one conv layer");
    return m;
}

ConvergenceExperimentSpec parse_theorem(const Json &doc) {
    ConvergenceExperimentSpec s;
    Block b(doc, "optimizer.theorem_mode");
    b.get("M", s.smoothness);
    b.get("G", s.lipschitz);
    b.get("D", s.diameter);
    b.get("h0", s.initial_gap);
    b.get("beta", s.beta);
    b.get("T", s.horizon);
    require(s.smoothness > 0 && s.lipschitz > 0 && s.diameter > 0 && s.initial_gap >= 0 && s.horizon >= 1,
            "optimizer.theorem_mode", "M, G, D must be positive, h0 non-negative and T >= 1");
    return s;
}

OptimizerConfig parse_optimizer(const Json &doc) {
    OptimizerConfig o;
    auto &s = o.settings;
    Block b(doc, "optimizer");
    std::string method = "sfw", schedule = "linear", rescale = "gradient";
    b.get("method", method);
    b.get("schedule", schedule);
    b.get("rescale", rescale);
    b.get("eta0", s.eta0);
    b.get("momentum", s.momentum);
    b.get("rho", s.momentum);
    b.get("weight_decay", s.weight_decay);
    b.get("lambda0", s.weight_decay);
    b.get("penalty", s.penalty);
    b.get("lambda1", s.penalty);
    require(!(b.has("momentum") && b.has("rho")) && !(b.has("weight_decay") && b.has("lambda0")) &&
                !(b.has("penalty") && b.has("lambda1")),
            "optimizer", "rho, lambda0 and lambda1 are aliases of momentum, weight_decay and penalty; give one name");
    b.get("penalty_match", o.penalty_match);
    if (const Json *svd = b.find("svd")) {
        Block sb(*svd, "optimizer.svd");
        sb.get("tol", s.svd.tol);
        sb.get("max_iter", s.svd.max_iter);
        sb.get("oversample", s.svd.oversample);
        require(s.svd.tol > 0.0 && s.svd.max_iter >= 1, "optimizer.svd", "tol must be positive and max_iter >= 1");
    }
    if (const Json *t = b.find("theorem_mode"))
        o.theorem = parse_theorem(*t);

    auto m = parse_method(method);
    require(m.has_value(), "optimizer.method", "unknown method '" + method + "'");
    s.method = *m;
    auto sc = parse_schedule(schedule);
    require(sc.has_value(), "optimizer.schedule", "unknown schedule '" + schedule + "'");
    s.schedule = *sc;
    auto r = parse_rescale(rescale);
    require(r.has_value(), "optimizer.rescale", "unknown rescale mode '" + rescale + "'");
    s.rescale = *r;
    require(s.eta0 >= 0.0, "optimizer.eta0", "must be non-negative");
    require(s.momentum >= 0.0 && s.momentum < 1.0, "optimizer.momentum", "must lie in [0, 1)");
    require(s.weight_decay >= 0.0, "optimizer.weight_decay", "must be non-negative");
    require(s.penalty >= 0.0, "optimizer.penalty", "must be non-negative");
    require(o.penalty_match == "all" || o.penalty_match == "dense" || o.penalty_match == "conv",
            "optimizer.penalty_match", "must be all, dense or conv");
    return o;
}

RegionConfig parse_region(const Json &doc, const std::string &where) {
    RegionConfig r;
    Block b(doc, where);
    std::string kind = "k_support";
    b.get("kind", kind);
    b.get("k_fraction", r.k_fraction);
    b.get("w", r.w);
    b.get("tau", r.tau);
    b.get("init_samples", r.init_samples);
    b.get("match", r.match);
    b.get("layers", r.layers);
    auto k = parse_region_kind(kind);
    require(k.has_value(), where + ".kind", "unknown region kind '" + kind + "'");
    r.kind = *k;
    require(r.k_fraction > 0.0 && r.k_fraction <= 1.0, where + ".k_fraction", "must lie in (0, 1]");
    require(!(r.w && r.tau), where, "give at most one of w and tau");
    if (!r.w && !r.tau)
        r.w = 1.0;
    if (r.w)
        require(*r.w > 0.0, where + ".w", "must be positive");
    if (r.tau)
        require(*r.tau > 0.0, where + ".tau", "must be positive");
    require(r.init_samples >= 1, where + ".init_samples", "must be at least 1");
    require(r.match == "all" || r.match == "dense" || r.match == "conv", where + ".match",
            "must be all, dense or conv");
    return r;
}

CompressionConfig parse_compression_block(const Json &doc) {
    CompressionConfig c;
    Block b(doc, "compression");
    std::string method = "magnitude";
    b.get("method", method);
    b.get("targets", c.targets);
    b.get("metric", c.metric);
    auto m = parse_compression(method);
    require(m.has_value(), "compression.method", "unknown method '" + method + "'");
    c.method = *m;
    require(!c.targets.empty(), "compression.targets", "must not be empty");
    for (std::size_t i = 0; i < c.targets.size(); ++i) {
        require(c.targets[i] >= 0.0 && c.targets[i] <= 1.0, "compression.targets", "values must lie in [0, 1]");
        if (i)
            require(c.targets[i] > c.targets[i - 1], "compression.targets", "must be strictly ascending");
    }
    if (c.method != CompressionMethod::Magnitude)
        require(c.targets.back() < 1.0, "compression.targets", "filter and lowrank targets must be below 1");
    require(c.metric == "test_acc" || c.metric == "train_acc", "compression.metric", "must be test_acc or train_acc");
    return c;
}

RunConfig parse_run(const Json &doc) {
    RunConfig r;
    Block b(doc, "run");
    b.get("epochs", r.epochs);
    b.get("batch_size", r.batch_size);
    b.get("seeds", r.seeds);
    b.get("out", r.out);
    b.get("trace", r.trace);
    b.get("wall_time", r.wall_time);
    require(r.epochs >= 1, "run.epochs", "must be at least 1");
    require(r.batch_size >= 1, "run.batch_size", "must be at least 1");
    require(!r.seeds.empty(), "run.seeds", "must not be empty");
    return r;
}

SelectionConfig parse_selection(const Json &doc) {
    SelectionConfig s;
    Block b(doc, "selection");
    b.get("filter_metric", s.filter_metric);
    b.get("drop_threshold", s.drop_threshold);
    require(s.filter_metric == "train" || s.filter_metric == "test", "selection.filter_metric",
            "must be train or test");
    require(s.drop_threshold >= 0.0 && s.drop_threshold <= 1.0, "selection.drop_threshold", "must lie in [0, 1]");
    return s;
}

} // namespace

std::string ExperimentConfig::label() const {
    if (!method_label.empty())
        return method_label;
    std::string name(method_name(optimizer.settings.method));
    if (optimizer.settings.method == Method::Sfw && !regions.empty())
        name += "_" + std::string(region_kind_name(regions.front().kind));
    return name;
}

ExperimentConfig parse_config(const Json &doc) {
    ExperimentConfig c;
    c.raw = doc;
    Block b(doc, "config");
    b.get("id", c.id);
    b.get("method_label", c.method_label);
    require(!c.id.empty() && c.id.find_first_of(",\n\"/\\") == std::string::npos, "config.id",
            "must be non-empty without commas, quotes, slashes or newlines");
    require(c.method_label.find_first_of(",\n\"") == std::string::npos, "config.method_label",
            "must not contain commas, quotes or newlines");
    if (const Json *v = b.find("dataset"))
        c.dataset = parse_dataset(*v);
    if (const Json *v = b.find("model"))
        c.model = parse_model(*v);
    if (const Json *v = b.find("optimizer"))
        c.optimizer = parse_optimizer(*v);
    if (const Json *v = b.find("region")) {
        if (v->is_array()) {
            for (std::size_t i = 0; i < v->size(); ++i)
                c.regions.push_back(parse_region((*v)[i], "region[" + std::to_string(i) + "]"));
        } else {
            c.regions.push_back(parse_region(*v, "region"));
        }
    }
    if (const Json *v = b.find("compression"))
        c.compression = parse_compression_block(*v);
    if (const Json *v = b.find("run"))
        c.run = parse_run(*v);
    if (const Json *v = b.find("selection"))
        c.selection = parse_selection(*v);
    if (const Json *v = b.find("grid_cell"))
        require(v->is_object(), "grid_cell", "expected an object");
    if (const Json *v = b.find("grid")) {
        require(v->is_object(), "grid", "expected an object of dotted path -> value list");
        for (const auto &[key, values] : v->items())
            require(values.is_array() && !values.empty(), "grid." + key, "expected a non-empty array");
        c.grid = *v;
    }
    if (c.optimizer.settings.method == Method::Sfw)
        require(!c.regions.empty(), "region", "sfw needs at least one region");
    if (c.compression.method != CompressionMethod::Magnitude)
        require(c.model.kind == "cnn", "compression.method", "filter and lowrank compression act on conv layers");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ConfigError, "cannot open config " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::ConfigError, path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

void set_dotted(Json &doc, const std::string &path, const Json &value) {
    Json *node = &doc;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.'))
        parts.push_back(part);
    if (parts.empty())
        throw Error(Errc::ConfigError, "empty grid path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        Json &next = (*node)[parts[i]];
        if (next.is_array()) {
            std::string rest = parts[i + 1];
            for (std::size_t j = i + 2; j < parts.size(); ++j)
                rest += "." + parts[j];
            for (auto &entry : next)
                set_dotted(entry, rest, value);
            return;
        }
        if (next.is_null())
            next = Json::object();
        if (!next.is_object())
            throw Error(Errc::ConfigError, "grid path " + path + " crosses a non-object");
        node = &next;
    }
    (*node)[parts.back()] = value;
}

std::vector<GridCell> expand_grid(const Json &doc) {
    const std::string id = doc.value("id", std::string("experiment"));
    Json base = doc;
    Json grid = Json::object();
    if (base.contains("grid")) {
        grid = base["grid"];
        base.erase("grid");
    }
    if (!grid.is_object() || grid.empty())
        return {{id, base}};
    std::vector<std::string> keys;
    for (const auto &[key, values] : grid.items()) {
        if (!values.is_array() || values.empty())
            throw Error(Errc::ConfigError, "grid." + key + ": expected a non-empty array");
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    std::size_t total = 1;
    for (const auto &k : keys)
        total *= grid[k].size();
    std::vector<GridCell> cells;
    cells.reserve(total);
    for (std::size_t index = 0; index < total; ++index) {
        Json cell = base;
        std::size_t rem = index;
        Json assignment = Json::object();
        for (std::size_t ki = keys.size(); ki-- > 0;) {
            const Json &values = grid[keys[ki]];
            const Json &v = values[rem % values.size()];
            rem /= values.size();
            set_dotted(cell, keys[ki], v);
            assignment[keys[ki]] = v;
        }
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "-g%03zu", index);
        const std::string cell_id = id + suffix;
        cell["id"] = cell_id;
        cell["grid_cell"] = assignment;
        cells.push_back({cell_id, std::move(cell)});
    }
    return cells;
}

} // namespace sfwc
