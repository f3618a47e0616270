#pragma once
// Score aggregation: turn per-episode run logs (or pre-aggregated score
// fixtures) into the per-game avg/max table with normalized-score rows.

#include <tgrl/agent.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tgrl::report {

namespace fs = std::filesystem;

// Fixed-format floats keep run logs byte-reproducible.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline void write_runlog(const rl::RunLog& log, int game_max_score, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write run log: " + path);
    nlohmann::json meta{{"type", "meta"},
                        {"game", log.game},
                        {"variant", log.variant},
                        {"seed", log.seed},
                        {"max_score", game_max_score}};
    out << meta.dump() << "\n";
    for (const auto& e : log.episodes) {
        out << "{\"type\":\"episode\",\"episode\":" << e.episode << ",\"score\":" << e.score
            << ",\"max_score\":" << e.max_score << ",\"steps\":" << e.steps
            << ",\"td_loss\":" << fmt_double(e.td_loss)
            << ",\"invdy_loss\":" << fmt_double(e.invdy_loss) << "}\n";
    }
    for (const auto& e : log.evals) {
        out << "{\"type\":\"eval\",\"episode\":" << e.episode << ",\"score\":" << e.score
            << ",\"steps\":" << e.steps << "}\n";
    }
}

struct LoadedRun {
    std::string game, variant;
    std::uint64_t seed = 0;
    int game_max_score = 0;
    rl::RunLog log;
};

inline LoadedRun read_runlog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read run log: " + path);
    LoadedRun run;
    std::string line;
    bool have_meta = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        const std::string type = j.value("type", "episode");
        if (type == "meta") {
            run.game = j.at("game").get<std::string>();
            run.variant = j.at("variant").get<std::string>();
            run.seed = j.at("seed").get<std::uint64_t>();
            run.game_max_score = j.at("max_score").get<int>();
            run.log.game = run.game;
            run.log.variant = run.variant;
            run.log.seed = run.seed;
            have_meta = true;
        } else if (type == "episode") {
            rl::EpisodeRecord e;
            e.episode = j.at("episode").get<int>();
            e.score = j.at("score").get<int>();
            e.max_score = j.at("max_score").get<int>();
            e.steps = j.at("steps").get<int>();
            e.td_loss = j.value("td_loss", 0.0);
            e.invdy_loss = j.value("invdy_loss", 0.0);
            run.log.episodes.push_back(e);
        }
    }
    if (!have_meta) throw std::runtime_error("run log has no meta record: " + path);
    return run;
}

struct ScoreEntry {
    std::string game, variant;
    double avg = 0;     // final episodic score (averaged over seeds)
    double max = 0;     // maximum explored score (best seed)
    double max_score = 0;
    bool partial = false;  // flagged when some seed logs were unreadable
};

struct ScoreTable {
    std::vector<ScoreEntry> entries;

    // avg norm: model score divided by maximum game score, averaged across
    // games (computed per variant; same for the max column).
    std::map<std::string, std::pair<double, double>> norm_rows() const {
        std::map<std::string, std::pair<double, double>> out;
        std::map<std::string, std::vector<const ScoreEntry*>> by_variant;
        for (const auto& e : entries) by_variant[e.variant].push_back(&e);
        for (const auto& [variant, rows] : by_variant) {
            double avg_sum = 0, max_sum = 0;
            for (const auto* e : rows) {
                avg_sum += e->max_score > 0 ? e->avg / e->max_score : 0.0;
                max_sum += e->max_score > 0 ? e->max / e->max_score : 0.0;
            }
            out[variant] = {avg_sum / rows.size(), max_sum / rows.size()};
        }
        return out;
    }

    std::string to_text() const {
        std::string out;
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-12s %-22s %10s %10s %10s\n", "game", "variant", "avg",
                      "max", "max_score");
        out += buf;
        for (const auto& e : entries) {
            std::snprintf(buf, sizeof(buf), "%-12s %-22s %10.2f %10.2f %10.0f%s\n", e.game.c_str(),
                          e.variant.c_str(), e.avg, e.max, e.max_score,
                          e.partial ? "  [partial]" : "");
            out += buf;
        }
        for (const auto& [variant, norms] : norm_rows()) {
            std::snprintf(buf, sizeof(buf), "%-12s %-22s %10.2f %10.2f\n", "avg norm",
                          variant.c_str(), norms.first, norms.second);
            out += buf;
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["entries"] = nlohmann::json::array();
        for (const auto& e : entries)
            j["entries"].push_back({{"game", e.game},
                                    {"variant", e.variant},
                                    {"avg", e.avg},
                                    {"max", e.max},
                                    {"max_score", e.max_score}});
        j["avg_norm"] = nlohmann::json::object();
        for (const auto& [variant, norms] : norm_rows())
            j["avg_norm"][variant] = {{"avg", norms.first}, {"max", norms.second}};
        return j;
    }
};

// Accepts run directories (searched recursively for *.jsonl run logs) and
// pre-aggregated fixture files ({"entries": [{game, variant, avg, max,
// max_score}]}). Every number is recomputed from the logs.
inline ScoreTable build_score_table(const std::vector<std::string>& inputs, int window = 100) {
    ScoreTable table;
    struct Bucket {
        std::vector<double> finals;
        double max_explored = 0;
        double max_score = 0;
        bool partial = false;
    };
    std::map<std::pair<std::string, std::string>, Bucket> buckets;

    for (const auto& input : inputs) {
        if (fs::is_regular_file(input) && fs::path(input).extension() == ".json") {
            std::ifstream in(input);
            auto j = nlohmann::json::parse(in);
            for (const auto& je : j.at("entries")) {
                ScoreEntry e;
                e.game = je.at("game").get<std::string>();
                e.variant = je.at("variant").get<std::string>();
                e.avg = je.at("avg").get<double>();
                e.max = je.at("max").get<double>();
                e.max_score = je.at("max_score").get<double>();
                table.entries.push_back(e);
            }
            continue;
        }
        std::vector<fs::path> logs;
        if (fs::is_regular_file(input)) {
            logs.push_back(input);
        } else if (fs::is_directory(input)) {
            for (const auto& p : fs::recursive_directory_iterator(input))
                if (p.is_regular_file() && p.path().extension() == ".jsonl")
                    logs.push_back(p.path());
        } else {
            throw std::runtime_error("report input not found: " + input);
        }
        std::sort(logs.begin(), logs.end());
        for (const auto& p : logs) {
            auto key = std::pair<std::string, std::string>();
            try {
                LoadedRun run = read_runlog(p.string());
                key = {run.game, run.variant};
                auto& b = buckets[key];
                b.max_score = run.game_max_score;
                b.finals.push_back(run.log.mean_final_score(window));
                b.max_explored = std::max(b.max_explored,
                                          static_cast<double>(run.log.max_explored_score()));
            } catch (const std::exception&) {
                if (!key.first.empty()) buckets[key].partial = true;
            }
        }
    }

    for (const auto& [key, b] : buckets) {
        ScoreEntry e;
        e.game = key.first;
        e.variant = key.second;
        e.max_score = b.max_score;
        e.partial = b.partial || b.finals.empty();
        if (!b.finals.empty()) {
            double s = 0;
            for (double f : b.finals) s += f;
            e.avg = s / static_cast<double>(b.finals.size());
        }
        e.max = b.max_explored;
        table.entries.push_back(e);
    }
    std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.game, a.variant) < std::tie(b.game, b.variant);
    });
    return table;
}

}  // namespace tgrl::report
