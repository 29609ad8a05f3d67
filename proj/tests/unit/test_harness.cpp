#include "helpers.hpp"

#include "sfwc/errors.hpp"
#include "sfwc/harness/config.hpp"
#include "sfwc/harness/experiment.hpp"
#include "sfwc/harness/gradcheck.hpp"
#include "sfwc/harness/select.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sfwc;
using sfwc::test::random_tensor;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("expected an sfwc::Error");
    return Errc::IoError;
}

Json tiny_doc() {
    return Json::parse(R"({
      "id": "tiny",
      "dataset": {"kind": "two_moons", "n_train": 96, "n_test": 64, "noise": 0.1, "seed": 3},
      "model": {"kind": "mlp", "hidden": [12, 12]},
      "optimizer": {"method": "sfw", "eta0": 0.5, "momentum": 0.9, "rescale": "gradient"},
      "region": {"kind": "k_support", "k_fraction": 0.2, "w": 5},
      "compression": {"method": "magnitude", "targets": [0, 0.5, 0.9]},
      "run": {"epochs": 3, "batch_size": 16, "seeds": [0], "trace": true}
    })");
}

fs::path scratch(const std::string &name) {
    const fs::path p = fs::temp_directory_path() / ("sfwc_unit_" + name);
    fs::remove_all(p);
    return p;
}

TradeoffRecord row(const std::string &method, const std::string &config, std::uint64_t seed, double target,
                   double post) {
    return {method, config, seed, target, target, 0.9, post};
}

} // namespace

TEST_CASE("config defaults and strictness") {
    const ExperimentConfig c = parse_config(Json::parse(R"({"id": "a", "region": {"kind": "k_support"}})"));
    CHECK(c.run.epochs == 30);
    CHECK(c.run.batch_size == 32);
    CHECK(c.optimizer.settings.momentum == 0.9);
    CHECK(c.optimizer.settings.eta0 == 0.1);
    CHECK(c.optimizer.settings.schedule == Schedule::LinearDecay);
    CHECK(c.selection.filter_metric == "train");
    CHECK(c.selection.drop_threshold == 0.05);
    REQUIRE(c.regions.size() == 1);
    CHECK(c.regions[0].w.value() == 1.0);
    CHECK(c.label() == "sfw_k_support");

    const auto bad = [](const char *text) { return code_of([&] { parse_config(Json::parse(text)); }); };
    CHECK(bad(R"({"id": "a", "region": {}, "extra": 1})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a", "region": {"k_fraction": "x"}})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a", "region": {"w": 2, "tau": 1}})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a"})") == Errc::ConfigError); // sfw without a region
    CHECK(bad(R"({"id": "a", "optimizer": {"method": "sgd", "momentum": 0.5, "rho": 0.5}})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a", "optimizer": {"method": "sgd"}, "run": {"seeds": []}})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a", "optimizer": {"method": "sgd"}, "compression": {"targets": [0.5, 0.2]}})") ==
          Errc::ConfigError);
    CHECK(bad(R"({"id": "a,b", "optimizer": {"method": "sgd"}})") == Errc::ConfigError);
    CHECK(bad(R"({"id": "a", "optimizer": {"method": "sgd"}, "compression": {"method": "filter"}})") ==
          Errc::ConfigError);

    const ExperimentConfig alias =
        parse_config(Json::parse(R"({"id": "a", "optimizer": {"method": "sgd", "rho": 0.5, "lambda0": 0.01}})"));
    CHECK(alias.optimizer.settings.momentum == 0.5);
    CHECK(alias.optimizer.settings.weight_decay == 0.01);

    const ExperimentConfig theorem = parse_config(Json::parse(
        R"({"id": "a", "optimizer": {"method": "sgd", "theorem_mode": {"M": 1, "G": 2, "D": 3, "h0": 0.5, "beta": 2, "T": 50}}})"));
    REQUIRE(theorem.optimizer.theorem.has_value());
    CHECK(theorem.optimizer.theorem->lipschitz == 2.0);
    CHECK(theorem.optimizer.theorem->horizon == 50);
}

TEST_CASE("grid expansion: sorted keys, last varies fastest") {
    Json doc = Json::parse(R"({"id": "g", "region": [{"kind": "k_support"}, {"kind": "l2"}],
                               "grid": {"region.k_fraction": [0.1, 0.2], "optimizer.eta0": [1, 2, 3]}})");
    const auto cells = expand_grid(doc);
    REQUIRE(cells.size() == 6);
    CHECK(cells[0].id == "g-g000");
    CHECK(cells[5].id == "g-g005");
    CHECK(cells[1].doc["optimizer"]["eta0"] == 1);
    CHECK(cells[1].doc["region"][0]["k_fraction"] == 0.2);
    CHECK(cells[1].doc["region"][1]["k_fraction"] == 0.2);
    CHECK(cells[4].doc["optimizer"]["eta0"] == 3);
    CHECK(cells[4].doc["region"][0]["k_fraction"] == 0.1);
    CHECK_FALSE(cells[0].doc.contains("grid"));
    CHECK(cells[3].doc["grid_cell"]["optimizer.eta0"] == 2);
    for (const auto &c : cells)
        CHECK(parse_config(c.doc).id == c.id);

    const auto single = expand_grid(Json::parse(R"({"id": "solo"})"));
    REQUIRE(single.size() == 1);
    CHECK(single[0].id == "solo");
}

TEST_CASE("grid_select examples") {
    // two configs with means 0.80 and 0.85, both passing the filter: the second wins
    std::vector<TradeoffRecord> rows = {row("m", "a", 0, 0.5, 0.80), row("m", "a", 0, 0.9, 0.80),
                                        row("m", "b", 0, 0.5, 0.84), row("m", "b", 0, 0.9, 0.86)};
    std::map<std::string, double> dense = {{"a", 0.95}, {"b", 0.96}};
    auto sel = grid_select(rows, dense, 0.96, 0.05);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].unfiltered.config_id == "b");
    REQUIRE(sel[0].filtered.has_value());
    CHECK(sel[0].filtered->config_id == "b");
    CHECK(sel[0].unfiltered.mean_post == doctest::Approx(0.85).epsilon(1e-15));

    // a config 6 points below the reference is excluded from the filtered selection only
    dense["b"] = 0.90;
    sel = grid_select(rows, dense, 0.96, 0.05);
    CHECK(sel[0].unfiltered.config_id == "b");
    CHECK(sel[0].filtered->config_id == "a");

    // exactly at the threshold still passes
    dense["b"] = 0.91;
    sel = grid_select(rows, dense, 0.96, 0.05);
    CHECK(sel[0].filtered->config_id == "b");

    // missing dense accuracy never passes; all filtered out gives no filtered winner
    sel = grid_select(rows, {}, 0.96, 0.05);
    CHECK_FALSE(sel[0].filtered.has_value());
    CHECK(sel[0].unfiltered.config_id == "b");
}

TEST_CASE("grid_select averages seeds per target, then targets") {
    // per target seed means: 0.5 -> (0.6 + 0.8)/2 = 0.7, 0.9 -> 0.4; mean 0.55
    std::vector<TradeoffRecord> rows = {row("m", "a", 0, 0.5, 0.6), row("m", "a", 1, 0.5, 0.8),
                                        row("m", "a", 0, 0.9, 0.4)};
    const auto sel = grid_select(rows, {{"a", 1.0}}, 1.0, 0.05);
    CHECK(sel[0].unfiltered.mean_post == doctest::Approx(0.55).epsilon(1e-15));
}

TEST_CASE("grid_select is invariant to row order and separates methods") {
    RngStream rng(4, RngPurpose::Data);
    std::vector<TradeoffRecord> rows;
    std::map<std::string, double> dense;
    for (const char *method : {"sfw", "sgd"})
        for (int c = 0; c < 5; ++c) {
            const std::string id = std::string(method) + std::to_string(c);
            dense[id] = 0.9 + 0.02 * rng.uniform();
            for (std::uint64_t seed = 0; seed < 3; ++seed)
                for (double t : {0.0, 0.5, 0.9})
                    rows.push_back(row(method, id, seed, t, rng.uniform()));
        }
    // a tie that must resolve to the smaller id
    rows.push_back(row("tie", "z", 0, 0.5, 0.7));
    rows.push_back(row("tie", "y", 0, 0.5, 0.7));
    dense["y"] = dense["z"] = 1.0;

    const auto reference = grid_select(rows, dense, 0.92, 0.05);
    REQUIRE(reference.size() == 3);
    CHECK(reference[2].unfiltered.config_id == "y");
    for (int trial = 0; trial < 50; ++trial) {
        auto shuffled = rows;
        const auto perm = rng.permutation(shuffled.size());
        for (std::size_t i = 0; i < perm.size(); ++i)
            shuffled[i] = rows[perm[i]];
        const auto again = grid_select(shuffled, dense, 0.92, 0.05);
        REQUIRE(again.size() == reference.size());
        for (std::size_t m = 0; m < again.size(); ++m) {
            CHECK(again[m].unfiltered.config_id == reference[m].unfiltered.config_id);
            CHECK(again[m].unfiltered.mean_post == reference[m].unfiltered.mean_post);
            CHECK(again[m].filtered.has_value() == reference[m].filtered.has_value());
        }
    }

    rows.push_back(row("sfw", "sfw0", 0, 0.7, 0.5));
    CHECK(code_of([&] { grid_select(rows, dense, 0.92, 0.05); }) == Errc::ConfigError);
}

TEST_CASE("metrics and trace CSV round trip") {
    std::vector<MetricsRow> m = {{1, 0.5, 0.75, 0.7, 1.25, 0.1, 0.0}, {2, 1.0 / 3.0, 0.8, 0.71, 2e-17, 1e-300, 3.5}};
    std::stringstream s;
    write_metrics_csv(s, m);
    CHECK(s.str().substr(0, kMetricsHeader.size()) == kMetricsHeader);
    const auto back = read_metrics_csv(s);
    REQUIRE(back.size() == 2);
    CHECK(back[1].train_loss == 1.0 / 3.0);
    CHECK(back[1].eff_lr_mean == 1e-300);

    std::vector<TraceRow> t = {{1, 0, 2, 0.1, 3.0, 0.5, 0.6, false}, {1, 1, 0, 0.09, 0.0, 0.0, 0.0, true}};
    std::stringstream ts;
    write_trace_csv(ts, t);
    const auto tb = read_trace_csv(ts);
    REQUIRE(tb.size() == 2);
    CHECK(tb[0].group == 2);
    CHECK(tb[1].skipped);

    std::stringstream bad("epoch,oops\n1,2\n");
    CHECK(code_of([&] { read_metrics_csv(bad); }) == Errc::IoError);
}

TEST_CASE("snapshot round trip and corruption") {
    const fs::path dir = scratch("snapshot");
    fs::create_directories(dir);
    RngStream rng(5, RngPurpose::Data);
    const std::vector<NamedTensor> tensors = {{"a", random_tensor({3, 4}, rng)}, {"b", Tensor::vector({-0.0, 1e-310})}};
    write_snapshot(dir / "s.bin", dir / "s.json", tensors);
    CHECK(fs::file_size(dir / "s.bin") == 8 + 8 * 14);
    const auto back = read_snapshot(dir / "s.bin", dir / "s.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "a");
    CHECK(back[0].value == tensors[0].value);
    CHECK(std::signbit(back[1].value[0]));
    CHECK(back[1].value[1] == 1e-310);

    fs::resize_file(dir / "s.bin", 8 + 8 * 13);
    CHECK(code_of([&] { read_snapshot(dir / "s.bin", dir / "s.json"); }) == Errc::TruncatedPayload);
    std::ofstream(dir / "s.bin", std::ios::binary) << "NOTASNAP";
    CHECK(code_of([&] { read_snapshot(dir / "s.bin", dir / "s.json"); }) == Errc::UnknownMagic);
    fs::remove_all(dir);
}

TEST_CASE("regions are sized from the initial norm") {
    const ExperimentConfig c = parse_config(tiny_doc());
    const DataSplits data = build_datasets(c.dataset);
    const Model model = build_model(c.model, data.train);
    const auto groups = build_regions(c, model, 0);
    REQUIRE(groups.size() == 3);
    const auto params = model.parameters();
    for (const auto &g : groups) {
        const Shape &shape = params[g.param]->value.shape();
        CHECK(g.region.k() == resolve_k(0.2, shape_size(shape)));
        const double init = estimate_init_norm(shape, InitScheme::FanInGaussian, 10,
                                               RngStream(0, RngPurpose::Init, 1 + g.weight_layer));
        CHECK(g.radius.init_norm == init);
        CHECK(g.region.diameter() == doctest::Approx(2.0 * 5.0 * init).epsilon(1e-12));
    }

    Json overlap = tiny_doc();
    overlap["region"] = Json::parse(R"([{"kind": "k_support"}, {"kind": "l2", "layers": [1]}])");
    CHECK(code_of([&] { build_regions(parse_config(overlap), model, 0); }) == Errc::ConfigError);

    Json split = tiny_doc();
    split["region"] = Json::parse(R"([{"kind": "k_support", "layers": [0, 2]}, {"kind": "l2", "layers": [1]}])");
    const auto mixed = build_regions(parse_config(split), model, 0);
    REQUIRE(mixed.size() == 3);
    CHECK(mixed[1].region.kind() == RegionKind::L2Ball);
    CHECK(mixed[2].entry == 0);

    Json fixed = tiny_doc();
    fixed["region"] = Json::parse(R"({"kind": "group_k_support", "k_fraction": 0.5, "tau": 2.5})");
    const auto g = build_regions(parse_config(fixed), model, 0);
    CHECK(g[0].region.tau() == 2.5);
    CHECK(g[0].region.groups().size() == 12); // one group per output row
    CHECK(g[0].region.k() == 6);
}

TEST_CASE("training run: determinism, feasibility, trace invariant, target-0 row") {
    const ExperimentConfig c = parse_config(tiny_doc());
    const SeedRun a = run_seed(c, 0);
    const SeedRun b = run_seed(c, 0);
    REQUIRE_FALSE(a.failure.has_value());
    REQUIRE(a.metrics.size() == 3);
    CHECK(a.steps == 3 * 6);
    CHECK(a.feasible());

    std::stringstream ma, mb, ta, tb;
    write_metrics_csv(ma, a.metrics);
    write_metrics_csv(mb, b.metrics);
    write_tradeoff_csv(ta, a.tradeoff);
    write_tradeoff_csv(tb, b.tradeoff);
    CHECK(ma.str() == mb.str());
    CHECK(ta.str() == tb.str());

    const SeedRun other = run_seed(c, 1);
    CHECK(other.metrics.back().train_loss != a.metrics.back().train_loss);

    // eff_lr_mean equals clamp(eta·‖g‖/‖v - θ‖) recomputed from the trace (skipped steps excluded)
    REQUIRE(a.trace.size() == a.steps * 3);
    std::stringstream trace_csv;
    write_trace_csv(trace_csv, a.trace);
    const auto trace = read_trace_csv(trace_csv);
    for (const auto &m : a.metrics) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto &t : trace) {
            if (t.epoch != m.epoch || t.skipped)
                continue;
            sum += std::clamp(t.eta * t.grad_norm / t.dir_norm, 0.0, 1.0);
            ++count;
        }
        REQUIRE(count > 0);
        CHECK(std::abs(sum / static_cast<double>(count) - m.eff_lr_mean) <= 1e-9);
    }

    REQUIRE(a.tradeoff.size() == 3);
    CHECK(a.tradeoff[0].target == 0.0);
    CHECK(a.tradeoff[0].achieved == 0.0);
    CHECK(a.tradeoff[0].metric_post == a.tradeoff[0].metric_pre);
    CHECK(a.tradeoff[0].metric_pre == a.dense_test_acc);
    const std::size_t prunable = a.model.prunable_count();
    CHECK(prunable == 2 * 12 + 12 * 12 + 12 * 2);
    CHECK(a.tradeoff[2].achieved == static_cast<double>(prunable * 9 / 10) / static_cast<double>(prunable));
    for (const auto &m : a.metrics)
        CHECK(m.wall_s == 0.0);
}

TEST_CASE("every optimizer method trains a small CNN") {
    Json doc = Json::parse(R"({
      "id": "cnn",
      "dataset": {"kind": "bars", "n_train": 32, "n_test": 16, "classes": 4, "image_size": 6},
      "model": {"kind": "cnn", "channels": [3, 4], "kernel": 3},
      "optimizer": {"method": "sgd", "eta0": 0.05, "penalty": 0.01, "penalty_match": "conv"},
      "compression": {"method": "filter", "targets": [0, 0.5]},
      "run": {"epochs": 1, "batch_size": 8}
    })");
    for (const char *method : {"sgd", "sgd_group", "sgd_nuclear", "proxgd"}) {
        doc["optimizer"]["method"] = method;
        const SeedRun r = run_seed(parse_config(doc), 0);
        CHECK_FALSE(r.failure.has_value());
        CHECK(r.tradeoff.size() == 2);
        CHECK(r.metrics[0].eff_lr_mean == doctest::Approx(0.05 * (1.0 - 1.5 / 4.0)).epsilon(1e-12));
    }
    doc["optimizer"]["method"] = "sfw";
    for (const char *kind : {"l2", "k_sparse_polytope", "k_support", "group_k_support", "spectral_k_support"}) {
        doc["region"] = {{"kind", kind}, {"k_fraction", 0.5}, {"w", 3}};
        const SeedRun r = run_seed(parse_config(doc), 0);
        CHECK(r.groups.size() == 3);
        CHECK(r.feasible());
    }
}

TEST_CASE("non-finite loss aborts the run with a diagnostic") {
    Json doc = tiny_doc();
    doc["optimizer"] = {{"method", "sgd"}, {"eta0", 1e200}, {"schedule", "constant"}};
    doc.erase("region");
    const SeedRun r = run_seed(parse_config(doc), 0);
    REQUIRE(r.failure.has_value());
    CHECK(r.failure->error == "NonFiniteLoss");
    CHECK(r.tradeoff.empty());

    const fs::path dir = scratch("nonfinite");
    write_seed_outputs(dir, r);
    CHECK(fs::exists(dir / "error_seed0.json"));
    fs::remove_all(dir);
}

TEST_CASE("cell outputs and sweep scan") {
    const fs::path out = scratch("cell");
    Json doc = tiny_doc();
    doc["run"]["seeds"] = {0, 1};
    doc["grid"] = {{"region.w", {2, 5}}};
    const auto results = run_sweep(doc, out, {}, 2);
    REQUIRE(results.size() == 2);
    for (const char *name : {"config.json", "tradeoff.csv", "metrics_seed0.csv", "metrics_seed1.csv",
                             "summary_seed1.json", "snapshot_seed0.bin", "snapshot_seed0.json", "trace_seed0.csv"})
        CHECK(fs::exists(results[1].dir / name));

    std::ifstream in(results[0].dir / "tradeoff.csv");
    const auto rows = read_tradeoff_csv(in);
    REQUIRE(rows.size() == 6);
    CHECK(rows[3].seed == 1);

    const SweepScan scan = scan_sweep(out);
    CHECK(scan.rows.size() == 12);
    REQUIRE(scan.dense_train.size() == 2);
    const double mean = (results[0].runs[0].dense_train_acc + results[0].runs[1].dense_train_acc) / 2.0;
    CHECK(scan.dense_train.at("tiny-g000") == mean);

    // one thread and two threads write the same bytes
    const fs::path serial = scratch("cell_serial");
    run_sweep(doc, serial, {}, 1);
    for (const char *name : {"tradeoff.csv", "metrics_seed1.csv", "snapshot_seed1.bin"}) {
        std::ifstream x(out / "tiny-g001" / name, std::ios::binary), y(serial / "tiny-g001" / name, std::ios::binary);
        const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
        CHECK(sx == sy);
    }
    fs::remove_all(out);
    fs::remove_all(serial);
}

TEST_CASE("built-in gradient checks pass") {
    for (const auto &r : builtin_gradchecks(1)) {
        INFO(r.name);
        CHECK(r.pass);
    }
}
