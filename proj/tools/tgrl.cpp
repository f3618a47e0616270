// Command-line harness: train / report / play / verify.
//
// Exit codes: 0 success, 1 config error, 2 runtime failure, 3 verification
// failure.

#include <tgrl/agent.hpp>
#include <tgrl/engine.hpp>
#include <tgrl/locgraph.hpp>
#include <tgrl/report.hpp>
#include <tgrl/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace tgrl;

namespace {

constexpr const char* kCodeVersion = "tgrl-1.0.0";

struct RunSpec {
    std::string game_path;
    std::string variant_name = "log";
    bool no_text_enc = false, no_att = false, no_invdy = false, no_po1 = false, no_po2 = false;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::string out_dir = "runs";
    int parallel = 0;  // 0 = hardware concurrency
    rl::TrainConfig train;

    rl::Variant variant() const {
        rl::Variant v = rl::Variant::parse(variant_name);
        if (no_text_enc) v.text_enc = false;
        if (no_att) v.att = false;
        if (no_invdy) v.invdy = false;
        if (no_po1) v.use_po1 = false;
        if (no_po2) v.use_po2 = false;
        if (!v.text_enc) v.att = false;  // attention cannot outlive the encoder it reads
        v.validate();
        return v;
    }

    nlohmann::json to_json() const {
        return {{"code_version", kCodeVersion},
                {"game", game_path},
                {"variant", variant_name},
                {"flags",
                 {{"text_enc", !no_text_enc},
                  {"att", !no_att},
                  {"invdy", !no_invdy},
                  {"po1", !no_po1},
                  {"po2", !no_po2}}},
                {"seeds", seeds},
                {"out", out_dir},
                {"train",
                 {{"gamma", train.gamma},
                  {"tau", train.tau},
                  {"lr", train.lr},
                  {"invdy_lambda", train.invdy_lambda},
                  {"grad_clip", train.grad_clip},
                  {"batch_size", train.batch_size},
                  {"buffer_capacity", train.buffer_capacity},
                  {"max_episode_steps", train.max_episode_steps},
                  {"num_envs", train.num_envs},
                  {"total_episodes", train.total_episodes},
                  {"locate_depth", train.locate_depth},
                  {"hash_dim", train.hash_dim},
                  {"emb", train.dims.emb},
                  {"gru_hidden", train.dims.gru_hidden},
                  {"qhead_hidden", train.dims.qhead_hidden},
                  {"invdy_hidden", train.dims.invdy_hidden},
                  {"eval_cadence", train.eval_cadence}}}};
    }
};

// Config file (JSON, same format family as game definitions). Flags parsed
// afterwards override anything set here.
void apply_config_file(RunSpec& spec, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("game")) spec.game_path = j["game"].get<std::string>();
    if (j.contains("variant")) spec.variant_name = j["variant"].get<std::string>();
    if (j.contains("flags")) {
        const auto& f = j["flags"];
        if (f.contains("text_enc")) spec.no_text_enc = !f["text_enc"].get<bool>();
        if (f.contains("att")) spec.no_att = !f["att"].get<bool>();
        if (f.contains("invdy")) spec.no_invdy = !f["invdy"].get<bool>();
        if (f.contains("po1")) spec.no_po1 = !f["po1"].get<bool>();
        if (f.contains("po2")) spec.no_po2 = !f["po2"].get<bool>();
    }
    if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("out")) spec.out_dir = j["out"].get<std::string>();
    if (j.contains("train")) {
        const auto& t = j["train"];
        auto& c = spec.train;
        if (t.contains("gamma")) c.gamma = t["gamma"].get<double>();
        if (t.contains("tau")) c.tau = t["tau"].get<double>();
        if (t.contains("lr")) c.lr = t["lr"].get<double>();
        if (t.contains("invdy_lambda")) c.invdy_lambda = t["invdy_lambda"].get<double>();
        if (t.contains("grad_clip")) c.grad_clip = t["grad_clip"].get<double>();
        if (t.contains("batch_size")) c.batch_size = t["batch_size"].get<int>();
        if (t.contains("buffer_capacity")) c.buffer_capacity = t["buffer_capacity"].get<int>();
        if (t.contains("max_episode_steps")) c.max_episode_steps = t["max_episode_steps"].get<int>();
        if (t.contains("num_envs")) c.num_envs = t["num_envs"].get<int>();
        if (t.contains("total_episodes")) c.total_episodes = t["total_episodes"].get<int>();
        if (t.contains("locate_depth")) c.locate_depth = t["locate_depth"].get<int>();
        if (t.contains("hash_dim")) c.hash_dim = t["hash_dim"].get<int>();
        if (t.contains("emb")) c.dims.emb = t["emb"].get<int>();
        if (t.contains("gru_hidden")) c.dims.gru_hidden = t["gru_hidden"].get<int>();
        if (t.contains("qhead_hidden")) c.dims.qhead_hidden = t["qhead_hidden"].get<int>();
        if (t.contains("invdy_hidden")) c.dims.invdy_hidden = t["invdy_hidden"].get<int>();
        if (t.contains("eval_cadence")) c.eval_cadence = t["eval_cadence"].get<int>();
    }
}

fs::path resolve_out_dir(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("TGRL_OUT_ROOT")) p = fs::path(root) / p;
    }
    return p;
}

int cmd_train(const RunSpec& spec) {
    const rl::Variant variant = spec.variant();  // throws on bad combos, before any env exists
    spec.train.validate();
    const GameDef game = load_game(spec.game_path);

    const fs::path run_dir =
        resolve_out_dir(spec.out_dir) / (game.name + "__" + variant.name());
    fs::create_directories(run_dir);
    {
        std::ofstream rs(run_dir / "runspec.json");
        rs << spec.to_json().dump(2) << "\n";
    }

    std::mutex io_mutex;
    nlohmann::json summary = nlohmann::json::object();
    std::atomic<bool> failed{false};
    std::string failure;

    auto one_seed = [&](std::uint64_t seed) {
        try {
            rl::DrrnAgent<float> agent(game, variant, spec.train, seed);
            const rl::RunLog log = agent.run_training();
            const std::string stem = "seed_" + std::to_string(seed);
            report::write_runlog(log, game.max_score, (run_dir / (stem + ".jsonl")).string());
            nn::save_params(agent.params(), agent.vocab().content_hash(),
                            (run_dir / (stem + ".ckpt")).string());
            std::lock_guard<std::mutex> lock(io_mutex);
            summary[stem] = {{"final_100_mean", log.mean_final_score(100)},
                             {"max_explored", log.max_explored_score()},
                             {"episodes", log.episodes.size()},
                             {"wall_seconds", log.wall_seconds}};
            std::cout << game.name << " " << variant.name() << " seed " << seed
                      << ": final-100 mean " << log.mean_final_score(100) << ", max "
                      << log.max_explored_score() << ", " << log.wall_seconds << "s\n";
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(io_mutex);
            failed = true;
            failure = e.what();
        }
    };

    unsigned workers = spec.parallel > 0 ? static_cast<unsigned>(spec.parallel)
                                         : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, spec.seeds.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= spec.seeds.size()) return;
                one_seed(spec.seeds[i]);
            }
        });
    for (auto& t : pool) t.join();

    if (failed) throw std::runtime_error("training run failed: " + failure);
    std::ofstream sum(run_dir / "summary.json");
    sum << summary.dump(2) << "\n";
    std::cout << "run directory: " << run_dir.string() << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& json_out, int window) {
    const report::ScoreTable table = report::build_score_table(inputs, window);
    std::cout << table.to_text();
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        out << table.to_json().dump(2) << "\n";
    }
    return 0;
}

int cmd_play(const std::string& game_path, bool show_state, const std::string& dump_path) {
    Env env(load_game(game_path));
    LocationMap map;
    std::ofstream dump;
    if (!dump_path.empty()) dump.open(dump_path);
    int step_idx = 0;

    auto show = [&](const Observation& obs, int reward) {
        std::cout << obs.response << "\n";
        std::cout << "[inventory] " << obs.inventory_text << "\n";
        std::cout << "[score " << env.score() << "]";
        if (reward != 0) std::cout << " (+" << reward << ")";
        std::cout << "\n";
        std::string key;
        if (!env.done()) {
            key = update_and_get_state(env, map, LocateMode{});
            if (show_state)
                std::cout << "[state] room=" << env.gt_room_id() << " key=" << key
                          << " hash=" << env.gt_state_hash() << "\n";
        }
        if (dump.is_open()) {
            nlohmann::json rec{{"step", step_idx},
                               {"location_key", key},
                               {"map_hash", str_hash(serialize_map(map))},
                               {"gt_room_id", env.gt_room_id()},
                               {"gt_state_hash", env.gt_state_hash()},
                               {"score", env.score()},
                               {"done", env.done()}};
            dump << rec.dump() << "\n";
        }
    };

    Observation obs = env.reset();
    show(obs, 0);
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line == "quit" || line == "q") break;
        if (line.empty()) continue;
        if (env.done()) {
            std::cout << "(episode over — resetting)\n";
            map.clear();
            obs = env.reset();
            step_idx = 0;
            show(obs, 0);
            continue;
        }
        ++step_idx;
        const StepResult r = env.step(line);
        show(r.observation, r.reward);
        if (r.done) std::cout << "*** episode finished with score " << env.score() << " ***\n";
    }
    std::cout << "final score: " << env.score() << "\n";
    return 0;
}

int cmd_verify(const std::string& root) {
    const verify::Report rep = verify::run_all(root);
    for (const auto& c : rep.checks)
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name
                  << (c.detail.empty() ? "" : ": " + c.detail) << "\n";
    if (!rep.all_passed()) return 3;
    std::cout << "all checks passed\n";
    return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoull(tok));
    }
    if (out.empty()) throw std::invalid_argument("no seeds in: " + csv);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-game RL harness: DRRN variants with hash and location-graph state reps"};
    app.require_subcommand(1);

    RunSpec spec;
    std::string config_path, seeds_csv;

    // config file applies before flag parsing so flags win
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    try {
        if (!config_path.empty()) apply_config_file(spec, config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    auto* train = app.add_subcommand("train", "train one variant over a list of seeds");
    train->add_option("--config", config_path, "JSON config file (defaults < file < flags)");
    train->add_option("--game", spec.game_path, "path to a .game file");
    train->add_option("--variant", spec.variant_name,
                      "drrn | obs_hash | drrn_invdy | log | gt_state | gt_room");
    train->add_flag("--no-text-enc", spec.no_text_enc, "drop all GRU text encoders");
    train->add_flag("--no-att", spec.no_att, "drop the attention pooling");
    train->add_flag("--no-invdy", spec.no_invdy, "drop the inverse-dynamics objective");
    train->add_flag("--no-po1", spec.no_po1, "drop the current-location hash");
    train->add_flag("--no-po2", spec.no_po2, "drop the last-look map hash");
    train->add_option("--seeds", seeds_csv, "comma-separated seed list (default 1,2,3)");
    train->add_option("--episodes", spec.train.total_episodes, "total episodes across envs");
    train->add_option("--envs", spec.train.num_envs, "parallel game environments");
    train->add_option("--max-steps", spec.train.max_episode_steps, "episode step limit");
    train->add_option("--out", spec.out_dir, "output directory (under $TGRL_OUT_ROOT if relative)");
    train->add_option("--gamma", spec.train.gamma, "discount");
    train->add_option("--tau", spec.train.tau, "Boltzmann temperature");
    train->add_option("--lr", spec.train.lr, "learning rate");
    train->add_option("--lambda", spec.train.invdy_lambda, "inverse-dynamics loss weight");
    train->add_option("--batch", spec.train.batch_size, "replay batch size");
    train->add_option("--buffer", spec.train.buffer_capacity, "replay capacity");
    train->add_option("--hash-dim", spec.train.hash_dim, "hash vector dimension");
    train->add_option("--emb", spec.train.dims.emb, "token embedding dimension");
    train->add_option("--hidden", spec.train.dims.gru_hidden, "GRU hidden dimension");
    train->add_option("--qhead-hidden", spec.train.dims.qhead_hidden, "Q-head hidden width");
    train->add_option("--depth", spec.train.locate_depth, "locate exploration depth");
    train->add_option("--eval-cadence", spec.train.eval_cadence,
                      "run a frozen-policy eval episode every N episodes (0 = off)");
    train->add_option("--parallel", spec.parallel, "worker threads across seeds (0 = auto)");

    std::vector<std::string> report_inputs;
    std::string report_json;
    int report_window = 100;
    auto* report_cmd = app.add_subcommand("report", "aggregate run logs into a score table");
    report_cmd->add_option("inputs", report_inputs, "run directories / fixture .json files")
        ->required();
    report_cmd->add_option("--json", report_json, "also write the table as JSON");
    report_cmd->add_option("--window", report_window, "final-score window (episodes)");

    std::string play_game, play_dump;
    bool play_show_state = false;
    auto* play = app.add_subcommand("play", "interactive episode on stdin/stdout");
    play->add_option("--game", play_game, "path to a .game file")->required();
    play->add_flag("--show-state", play_show_state, "print room id and location key per step");
    play->add_option("--dump", play_dump, "write per-step trajectory records (jsonl)");

    std::string verify_root = ".";
    auto* verify_cmd = app.add_subcommand("verify", "golden hashes, gradients, engine oracles");
    verify_cmd->add_option("--root", verify_root, "repo root holding games/ and data/");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) {
            if (!seeds_csv.empty()) spec.seeds = parse_seeds(seeds_csv);
            if (spec.game_path.empty()) {
                std::cerr << "config error: --game is required\n";
                return 1;
            }
            try {
                spec.variant();  // config validation precedes any env/model work
                spec.train.validate();
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 1;
            }
            return cmd_train(spec);
        }
        if (report_cmd->parsed()) return cmd_report(report_inputs, report_json, report_window);
        if (play->parsed()) return cmd_play(play_game, play_show_state, play_dump);
        if (verify_cmd->parsed()) return cmd_verify(verify_root);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
