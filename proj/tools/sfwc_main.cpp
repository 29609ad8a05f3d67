#include "sfwc/errors.hpp"
#include "sfwc/harness/config.hpp"
#include "sfwc/harness/experiment.hpp"
#include "sfwc/harness/gradcheck.hpp"
#include "sfwc/harness/select.hpp"
#include "sfwc/harness/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace sfwc;

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = 1;
};

Json read_json(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::ConfigError, "cannot open config " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw Error(Errc::ConfigError, path + ": " + e.what());
    }
}

std::vector<std::uint64_t> seed_override(const Globals &g) {
    return g.seed ? std::vector<std::uint64_t>{*g.seed} : std::vector<std::uint64_t>{};
}

void report_runs(const ExperimentResult &r) {
    for (const auto &run : r.runs) {
        if (run.failure) {
            std::printf("FAIL %s seed=%llu %s at epoch %zu step %zu\n", run.config_id.c_str(),
                        static_cast<unsigned long long>(run.seed), run.failure->error.c_str(), run.failure->epoch,
                        run.failure->step);
            continue;
        }
        std::printf("done %s seed=%llu train_acc=%.4f test_acc=%.4f feasible=%s -> %s\n", run.config_id.c_str(),
                    static_cast<unsigned long long>(run.seed), run.dense_train_acc, run.dense_test_acc,
                    run.feasible() ? "yes" : "no", r.dir.string().c_str());
    }
}

int cmd_train(const Globals &g) {
    if (g.config.empty())
        throw Error(Errc::ConfigError, "train needs --config");
    const Json doc = read_json(g.config);
    if (doc.contains("grid"))
        throw Error(Errc::ConfigError, "config has a grid block; run it with `sweep`");
    const ExperimentConfig config = parse_config(doc);
    const auto seeds = seed_override(g);
    const auto result = run_experiment(config, g.out.empty() ? config.run.out : g.out, seeds);
    report_runs(result);
    return result.ok() ? kOk : kFailed;
}

int cmd_sweep(const Globals &g) {
    if (g.config.empty())
        throw Error(Errc::ConfigError, "sweep needs --config");
    const Json doc = read_json(g.config);
    const ExperimentConfig base = parse_config(doc);
    const auto seeds = seed_override(g);
    const auto results = run_sweep(doc, g.out.empty() ? base.run.out : g.out, seeds, g.threads);
    bool ok = true;
    for (const auto &r : results) {
        report_runs(r);
        ok = ok && r.ok();
    }
    return ok ? kOk : kFailed;
}

struct SelectArgs {
    std::string sweep;
    std::optional<double> reference;
    double threshold = 0.05;
    std::string filter_metric = "train";
};

int cmd_select(const Globals &g, SelectArgs a) {
    if (!g.config.empty()) {
        const ExperimentConfig c = parse_config(read_json(g.config));
        a.threshold = c.selection.drop_threshold;
        a.filter_metric = c.selection.filter_metric;
        if (a.sweep.empty())
            a.sweep = (std::filesystem::path(c.run.out)).string();
    }
    if (a.sweep.empty())
        throw Error(Errc::ConfigError, "select needs --sweep <dir> (or --config)");
    const SweepScan scan = scan_sweep(a.sweep);
    const auto &dense = a.filter_metric == "test" ? scan.dense_test : scan.dense_train;
    double reference = 0.0;
    if (a.reference) {
        reference = *a.reference;
    } else {
        for (const auto &[id, acc] : dense)
            reference = std::max(reference, acc);
    }
    const auto selections = grid_select(scan.rows, dense, reference, a.threshold);
    const Json j = selection_json(selections, reference, a.threshold, a.filter_metric);
    const std::filesystem::path out = g.out.empty() ? std::filesystem::path(a.sweep) : std::filesystem::path(g.out);
    std::filesystem::create_directories(out);
    std::ofstream(out / "selection.json") << j.dump(2) << "\n";
    for (const auto &s : selections) {
        std::printf("%s unfiltered=%s (%.4f)", s.method.c_str(), s.unfiltered.config_id.c_str(),
                    s.unfiltered.mean_post);
        if (s.filtered)
            std::printf(" filtered=%s (%.4f)\n", s.filtered->config_id.c_str(), s.filtered->mean_post);
        else
            std::printf(" filtered=none\n");
    }
    return kOk;
}

struct LmoArgs {
    std::string kind;
    std::string shape;
    std::size_t k = 1;
    std::size_t group_size = 2;
    std::size_t trials = 1000;
};

Shape parse_shape(const std::string &text) {
    Shape shape;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t x = text.find('x', pos);
        const std::string part = text.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
        try {
            std::size_t used = 0;
            const unsigned long v = std::stoul(part, &used);
            if (used != part.size() || v == 0)
                throw std::invalid_argument(part);
            shape.push_back(v);
        } catch (const std::exception &) {
            throw Error(Errc::ConfigError, "bad shape '" + text + "' (expected e.g. 8 or 4x5)");
        }
        if (x == std::string::npos)
            break;
        pos = x + 1;
    }
    if (shape.empty() || shape.size() > 2)
        throw Error(Errc::ConfigError, "shape must be a vector or a matrix");
    return shape;
}

int cmd_verify_lmo(const Globals &g, const LmoArgs &a) {
    const std::uint64_t seed = g.seed.value_or(0);
    std::vector<LmoCase> cases;
    if (a.kind.empty()) {
        cases = default_lmo_suite(a.trials, seed);
    } else {
        const auto kind = parse_region_kind(a.kind);
        if (!kind)
            throw Error(Errc::ConfigError, "unknown region kind '" + a.kind + "'");
        LmoCase c;
        c.kind = *kind;
        c.shape = parse_shape(a.shape.empty() ? (*kind == RegionKind::SpectralKSupport ? "4x5" : "8") : a.shape);
        c.k = a.k;
        c.group_size = a.group_size;
        c.trials = a.trials;
        c.seed = seed;
        cases.push_back(c);
    }
    bool ok = true;
    for (const auto &c : cases) {
        const LmoReport r = verify_lmo(c);
        ok = ok && r.pass;
        std::printf("%s %s max_gap=%.3e max_infeasibility=%.3e trials=%zu\n", r.pass ? "PASS" : "FAIL",
                    r.label().c_str(), r.max_gap, r.max_infeasibility, r.trials);
    }
    return ok ? kOk : kFailed;
}

int cmd_check_convergence(const Globals &g, std::size_t seeds) {
    ConvergenceCheckOptions options;
    options.seeds = seeds;
    if (!g.config.empty()) {
        const ExperimentConfig c = parse_config(read_json(g.config));
        if (!c.optimizer.theorem)
            throw Error(Errc::ConfigError, "config has no optimizer.theorem_mode block");
        options.constants = *c.optimizer.theorem;
        options.horizons = {options.constants.horizon, 4 * options.constants.horizon};
    }
    if (g.seed)
        options.problem_seed = *g.seed;
    const ConvergenceReport r = convergence_check(options);
    std::printf("instance M=%.6g G=%.6g h0=%.6g D=%.6g lipschitz_respected=%s\n", r.smoothness, r.lipschitz,
                r.initial_gap, r.diameter, r.lipschitz_respected ? "yes" : "no");
    for (const auto &h : r.horizons)
        std::printf("%s T=%zu eta=%.6g bound=%.6g measured=%.6g sampled=%.6g\n", h.within_bound ? "PASS" : "FAIL",
                    h.horizon, h.eta, h.bound, h.measured_mean, h.sampled_mean);
    std::printf("%s ratio=%.4f (expected in [%.1f, %.1f])\n", r.pass ? "PASS" : "FAIL", r.ratio, kRatioLow,
                kRatioHigh);
    return r.pass ? kOk : kFailed;
}

int cmd_gradcheck(const Globals &g) {
    const std::uint64_t seed = g.seed.value_or(0);
    std::vector<GradcheckReport> reports;
    if (g.config.empty())
        reports = builtin_gradchecks(seed);
    else
        reports.push_back(gradcheck_config(parse_config(read_json(g.config)), seed));
    bool ok = true;
    for (const auto &r : reports) {
        ok = ok && r.pass;
        std::printf("%s %s max_rel_error=%.3e tolerance=%.0e\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.max_rel_error, r.tolerance);
    }
    return ok ? kOk : kFailed;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Stochastic Frank-Wolfe compression-aware training harness"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON experiment config");
    app.add_option("--seed", g.seed, "seed (overrides run.seeds)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "parallel jobs for sweep")->check(CLI::PositiveNumber);

    auto *train = app.add_subcommand("train", "train one config and run its compression sweep");
    auto *sweep = app.add_subcommand("sweep", "run every grid cell and seed of a config");

    SelectArgs select_args;
    auto *select = app.add_subcommand("select", "pick the best config per method from a sweep");
    select->add_option("--sweep", select_args.sweep, "sweep output directory");
    select->add_option("--reference", select_args.reference, "dense reference accuracy (default: best dense run)");
    select->add_option("--threshold", select_args.threshold, "dense-drop threshold")->check(CLI::Range(0.0, 1.0));
    select->add_option("--filter-metric", select_args.filter_metric, "train or test")
        ->check(CLI::IsMember({"train", "test"}));

    LmoArgs lmo_args;
    auto *verify = app.add_subcommand("verify-lmo", "check LMOs against brute force (full suite without --kind)");
    verify->add_option("--kind", lmo_args.kind, "l2 | k_sparse_polytope | k_support | group_k_support | spectral_k_support");
    verify->add_option("--shape", lmo_args.shape, "dim or RxC");
    verify->add_option("--k", lmo_args.k)->check(CLI::PositiveNumber);
    verify->add_option("--group-size", lmo_args.group_size)->check(CLI::PositiveNumber);
    verify->add_option("--trials", lmo_args.trials)->check(CLI::PositiveNumber);

    std::size_t convergence_seeds = 20;
    auto *conv = app.add_subcommand("check-convergence", "empirical check of the SFW convergence bound");
    conv->add_option("--seeds", convergence_seeds, "independent runs per horizon")->check(CLI::PositiveNumber);

    auto *grad = app.add_subcommand("gradcheck", "finite-difference gradient check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*train)
            return cmd_train(g);
        if (*sweep)
            return cmd_sweep(g);
        if (*select)
            return cmd_select(g, select_args);
        if (*verify)
            return cmd_verify_lmo(g, lmo_args);
        if (*conv)
            return cmd_check_convergence(g, convergence_seeds);
        if (*grad)
            return cmd_gradcheck(g);
    } catch (const Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == Errc::ConfigError || e.code() == Errc::IoError ? kConfigError : kFailed;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailed;
    }
    return kConfigError;
}
