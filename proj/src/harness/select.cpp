#include "sfwc/harness/select.hpp"

#include "sfwc/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace sfwc {

namespace fs = std::filesystem;

std::vector<MethodSelection> grid_select(std::span<const TradeoffRecord> rows,
                                         const std::map<std::string, double> &dense_acc, double reference,
                                         double threshold) {
    // method -> config -> target -> metric_post per row
    std::map<std::string, std::map<std::string, std::map<double, std::vector<double>>>> table;
    for (const auto &r : rows)
        table[r.method][r.config_id][r.target].push_back(r.metric_post);

    std::vector<MethodSelection> out;
    for (const auto &[method, configs] : table) {
        MethodSelection sel;
        sel.method = method;
        std::optional<std::set<double>> targets;
        for (const auto &[config_id, by_target] : configs) {
            std::set<double> these;
            ConfigScore score;
            score.method = method;
            score.config_id = config_id;
            double total = 0.0;
            for (const auto &[target, values] : by_target) {
                these.insert(target);
                auto sorted = values;
                std::sort(sorted.begin(), sorted.end());
                double sum = 0.0;
                for (double v : sorted)
                    sum += v;
                total += sum / static_cast<double>(sorted.size());
            }
            if (!targets)
                targets = these;
            else if (*targets != these)
                throw Error(Errc::ConfigError, "method " + method + ": config " + config_id +
                                                   " does not share the target grid of the other configs");
            score.mean_post = total / static_cast<double>(by_target.size());
            if (auto it = dense_acc.find(config_id); it != dense_acc.end()) {
                score.dense_acc = it->second;
                score.passes_filter = it->second >= reference - threshold;
            }
            sel.candidates.push_back(score);
        }
        // candidates are sorted by id; strict comparisons keep the smallest id on ties
        const ConfigScore *best = nullptr;
        const ConfigScore *best_filtered = nullptr;
        for (const auto &c : sel.candidates) {
            if (!best || c.mean_post > best->mean_post)
                best = &c;
            if (c.passes_filter && (!best_filtered || c.mean_post > best_filtered->mean_post))
                best_filtered = &c;
        }
        sel.unfiltered = *best;
        if (best_filtered)
            sel.filtered = *best_filtered;
        out.push_back(std::move(sel));
    }
    return out;
}

SweepScan scan_sweep(const fs::path &root) {
    if (!fs::is_directory(root))
        throw Error(Errc::IoError, root.string() + " is not a directory");
    std::vector<fs::path> dirs;
    for (const auto &entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file() && entry.path().filename() == "tradeoff.csv")
            dirs.push_back(entry.path().parent_path());
    std::sort(dirs.begin(), dirs.end());

    SweepScan scan;
    std::map<std::string, std::pair<double, std::size_t>> train, test;
    for (const auto &dir : dirs) {
        std::ifstream in(dir / "tradeoff.csv");
        auto rows = read_tradeoff_csv(in);
        scan.rows.insert(scan.rows.end(), rows.begin(), rows.end());
        std::vector<fs::path> summaries;
        for (const auto &entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("summary_seed", 0) == 0 && entry.path().extension() == ".json")
                summaries.push_back(entry.path());
        }
        std::sort(summaries.begin(), summaries.end());
        for (const auto &path : summaries) {
            std::ifstream sin(path);
            Json s;
            try {
                s = Json::parse(sin);
            } catch (const nlohmann::json::exception &e) {
                throw Error(Errc::IoError, path.string() + ": " + e.what());
            }
            if (s.contains("failure"))
                continue;
            const std::string id = s.at("config_id").get<std::string>();
            train[id].first += s.at("dense_train_acc").get<double>();
            ++train[id].second;
            test[id].first += s.at("dense_test_acc").get<double>();
            ++test[id].second;
        }
    }
    for (const auto &[id, acc] : train)
        scan.dense_train[id] = acc.first / static_cast<double>(acc.second);
    for (const auto &[id, acc] : test)
        scan.dense_test[id] = acc.first / static_cast<double>(acc.second);
    return scan;
}

namespace {

Json score_json(const ConfigScore &s) {
    Json j = {{"config_id", s.config_id}, {"mean_post", s.mean_post}, {"passes_filter", s.passes_filter}};
    j["dense_acc"] = s.dense_acc ? Json(*s.dense_acc) : Json(nullptr);
    return j;
}

} // namespace

Json selection_json(std::span<const MethodSelection> selections, double reference, double threshold,
                    const std::string &filter_metric) {
    Json j;
    j["reference"] = reference;
    j["drop_threshold"] = threshold;
    j["filter_metric"] = filter_metric;
    Json methods = Json::array();
    for (const auto &s : selections) {
        Json m;
        m["method"] = s.method;
        m["filtered"] = s.filtered ? score_json(*s.filtered) : Json(nullptr);
        m["unfiltered"] = score_json(s.unfiltered);
        Json c = Json::array();
        for (const auto &cand : s.candidates)
            c.push_back(score_json(cand));
        m["candidates"] = c;
        methods.push_back(m);
    }
    j["methods"] = methods;
    return j;
}

} // namespace sfwc
