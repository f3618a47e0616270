#include <tgrl/agent.hpp>
#include <tgrl/report.hpp>

#include "testutil.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace tgrl;
using namespace tgrl::rl;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.dims.emb = 8;
    cfg.dims.gru_hidden = 10;
    cfg.dims.qhead_hidden = 16;
    cfg.dims.invdy_hidden = 16;
    cfg.hash_dim = 12;
    cfg.batch_size = 4;
    cfg.buffer_capacity = 512;
    cfg.num_envs = 2;
    cfg.total_episodes = 10;
    return cfg;
}

template <typename T>
Transition<T> simple_transition(DrrnAgent<T>& agent, Env& env) {
    const Observation obs = env.reset();
    LocationMap map;
    Transition<T> tr;
    tr.state = agent.build_state_input(env, obs, map, "(X|)");
    tr.action = agent.build_action_input("east");
    tr.cur_valid = {agent.build_action_input("east"), agent.build_action_input("look")};
    tr.taken_index = 0;
    tr.reward = 1.0;
    tr.done = true;
    tr.next_state = tr.state;
    return tr;
}

}  // namespace

TEST(Variant, DefaultsPerBase) {
    const Variant log = Variant::make(VariantBase::Log);
    EXPECT_TRUE(log.text_enc && log.att && log.invdy && log.use_po1 && log.use_po2);
    const Variant drrn = Variant::make(VariantBase::Drrn);
    EXPECT_TRUE(drrn.text_enc);
    EXPECT_FALSE(drrn.att || drrn.invdy || drrn.use_po1 || drrn.use_po2);
    const Variant oh = Variant::make(VariantBase::ObsHash);
    EXPECT_FALSE(oh.text_enc);
}

TEST(Variant, IllegalCombosRejected) {
    Variant v = Variant::make(VariantBase::GtState);
    v.use_po1 = true;
    EXPECT_THROW(v.validate(), std::invalid_argument);

    Variant o = Variant::make(VariantBase::ObsHash);
    o.text_enc = true;
    EXPECT_THROW(o.validate(), std::invalid_argument);

    Variant d = Variant::make(VariantBase::Drrn);
    d.text_enc = false;
    EXPECT_THROW(d.validate(), std::invalid_argument);

    Variant a = Variant::make(VariantBase::Log);
    a.text_enc = false;
    a.att = true;
    EXPECT_THROW(a.validate(), std::invalid_argument);

    Variant ok = Variant::make(VariantBase::Log);
    ok.text_enc = false;
    ok.att = false;
    EXPECT_NO_THROW(ok.validate());  // the "- Text Enc." ablation
}

TEST(Variant, ParseNames) {
    EXPECT_EQ(Variant::parse("log").base, VariantBase::Log);
    EXPECT_EQ(Variant::parse("gt_state").base, VariantBase::GtState);
    EXPECT_THROW(Variant::parse("nope"), std::invalid_argument);
}

TEST(SelectAction, EqualQGivesUniform) {
    const std::vector<double> q = {1.0, 1.0};
    const auto p = boltzmann_probs(q, 1.0);
    EXPECT_NEAR(p[0], 0.5, 1e-12);
    EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(SelectAction, HandComputedTwoAction) {
    const std::vector<double> q = {1.0, 0.0};
    const auto p = boltzmann_probs(q, 1.0);
    EXPECT_NEAR(p[0], 0.731058578630, 1e-9);
    EXPECT_NEAR(p[1], 0.268941421370, 1e-9);
}

TEST(SelectAction, ShiftInvariance) {
    const std::vector<double> q = {0.3, -0.2, 1.1};
    std::vector<double> shifted = q;
    for (auto& v : shifted) v += 123.456;
    const auto p1 = boltzmann_probs(q, 0.7);
    const auto p2 = boltzmann_probs(shifted, 0.7);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p1[i], p2[i], 1e-10);

    Rng r1(5), r2(5);
    EXPECT_EQ(select_action(q, 1.0, r1, true), select_action(shifted, 1.0, r2, true));
}

TEST(SelectAction, GreedyTieBreaksLowestIndex) {
    Rng rng(1);
    const std::vector<double> q = {2.0, 2.0, 1.0};
    EXPECT_EQ(select_action(q, 1.0, rng, true), 0);
}

TEST(SelectAction, EmpiricalFrequenciesWithinMultinomialBounds) {
    const std::vector<double> q = {0.5, 0.0, -0.5};
    const auto p = boltzmann_probs(q, 1.0);
    Rng rng(99);
    const int n = 100000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) ++counts[select_action(q, 1.0, rng)];
    for (int k = 0; k < 3; ++k) {
        const double expect = n * p[k];
        const double sigma = std::sqrt(n * p[k] * (1 - p[k]));
        EXPECT_NEAR(counts[k], expect, 3 * sigma) << "action " << k;
    }
}

TEST(SelectAction, LowTemperatureApproachesGreedy) {
    const std::vector<double> q = {1.0, 0.0};
    Rng rng(7);
    int picks0 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        if (select_action(q, 0.01, rng) == 0) ++picks0;
    EXPECT_GE(picks0 / static_cast<double>(n), 0.999);
}

TEST(SelectAction, EmptyListIsError) {
    Rng rng(1);
    EXPECT_THROW(select_action({}, 1.0, rng), std::invalid_argument);
}

TEST(TdTarget, DoneReturnsReward) {
    auto cfg = tiny_config();
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 1);
    auto tr = simple_transition(agent, env);
    tr.reward = 10.0;
    EXPECT_DOUBLE_EQ(agent.td_target(tr), 10.0);
}

TEST(TdTarget, BootstrapsWithGammaTimesMaxQ) {
    auto cfg = tiny_config();
    cfg.gamma = 0.9;
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 1);
    // force Q ≡ 2 by zeroing the final layer and setting its bias
    auto& q = agent.params().qhead;
    std::fill(q.W2.w.begin(), q.W2.w.end(), 0.0f);
    q.b2.w[0] = 2.0f;

    auto tr = simple_transition(agent, env);
    tr.done = false;
    tr.reward = 1.0;
    tr.next_valid = {agent.build_action_input("east"), agent.build_action_input("look")};
    EXPECT_NEAR(agent.td_target(tr), 2.8, 1e-6);
}

TEST(ReplayBuffer, FifoEvictionAndMembership) {
    const std::size_t cap = 16, extra = 5;
    ReplayBuffer<float> buf(cap);
    for (std::size_t i = 0; i < cap + extra; ++i) {
        Transition<float> tr;
        tr.reward = static_cast<double>(i);
        buf.push(std::move(tr));
    }
    EXPECT_EQ(buf.size(), cap);
    std::set<int> present;
    for (std::size_t i = 0; i < buf.size(); ++i)
        present.insert(static_cast<int>(buf.at(i).reward));
    for (std::size_t i = 0; i < extra; ++i) EXPECT_FALSE(present.count(static_cast<int>(i)));
    for (std::size_t i = extra; i < cap + extra; ++i)
        EXPECT_TRUE(present.count(static_cast<int>(i)));

    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto& tr = buf.sample(rng);
        EXPECT_TRUE(present.count(static_cast<int>(tr.reward)));
    }
}

TEST(ReplayBuffer, SamplingEmptyThrows) {
    ReplayBuffer<float> buf(4);
    Rng rng(1);
    EXPECT_THROW(buf.sample(rng), std::logic_error);
}

TEST(TrainStep, LambdaZeroReducesToTdLoss) {
    auto cfg = tiny_config();
    cfg.invdy_lambda = 0.0;
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::DrrnInvdy), cfg, 1);
    auto tr = simple_transition(agent, env);
    std::vector<const Transition<float>*> batch{&tr, &tr};
    const Losses l = agent.train_step(batch);
    EXPECT_DOUBLE_EQ(l.total, l.td);
    EXPECT_GT(l.invdy, 0.0);  // computed but unweighted
}

TEST(TrainStep, ZeroLossWhenTargetEqualsQ) {
    auto cfg = tiny_config();
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 1);
    auto& q = agent.params().qhead;
    std::fill(q.W2.w.begin(), q.W2.w.end(), 0.0f);
    q.b2.w[0] = 0.0f;
    auto tr = simple_transition(agent, env);
    tr.reward = 0.0;  // target 0, Q ≡ 0
    std::vector<const Transition<float>*> batch{&tr};
    const Losses l = agent.train_step(batch);
    EXPECT_NEAR(l.td, 0.0, 1e-10);
    EXPECT_NEAR(l.total, 0.0, 1e-10);
}

TEST(TrainStep, OverfitsAFrozenBatch) {
    auto cfg = tiny_config();
    cfg.lr = 5e-3;
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 3);
    auto tr = simple_transition(agent, env);
    std::vector<const Transition<float>*> batch{&tr};
    double first = 0, last = 0;
    for (int step = 0; step < 100; ++step) {
        const Losses l = agent.train_step(batch);
        if (step == 0) first = l.td;
        last = l.td;
    }
    EXPECT_LT(last, first);
    EXPECT_LT(last, 0.05);
}

TEST(TrainStep, NonFiniteLossAborts) {
    auto cfg = tiny_config();
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 1);
    agent.params().qhead.b2.w[0] = std::numeric_limits<float>::infinity();
    auto tr = simple_transition(agent, env);
    std::vector<const Transition<float>*> batch{&tr};
    EXPECT_THROW(agent.train_step(batch), std::runtime_error);
}

TEST(ObsHash, NoGradientReachesTextEncoder) {
    auto cfg = tiny_config();
    cfg.total_episodes = 6;
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::ObsHash), cfg, 5);

    std::vector<std::vector<float>> before;
    for (auto* m : agent.params().text_encoder_mats()) before.push_back(m->w);
    std::vector<float> qhead_before = agent.params().qhead.W1.w;

    agent.run_training();

    auto after = agent.params().text_encoder_mats();
    for (std::size_t i = 0; i < after.size(); ++i)
        EXPECT_EQ(before[i], after[i]->w) << after[i]->name;
    EXPECT_NE(qhead_before, agent.params().qhead.W1.w);  // Q head does learn
}

TEST(RunTraining, EpisodesTruncateAtLimitAndLogsAreComplete) {
    auto cfg = tiny_config();
    cfg.max_episode_steps = 9;
    cfg.total_episodes = 8;
    Env env(testutil::load("maze.game"));  // no terminal trigger: always truncates
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 2);
    const RunLog log = agent.run_training();
    ASSERT_EQ(log.episodes.size(), 8u);
    for (const auto& e : log.episodes) {
        EXPECT_LE(e.steps, 9);
        EXPECT_GE(e.steps, 1);
    }
}

TEST(RunTraining, MaxExploredScoreNonDecreasing) {
    auto cfg = tiny_config();
    cfg.total_episodes = 12;
    Env env(testutil::load("trail.game"));
    DrrnAgent<float> agent(env.def(), Variant::make(VariantBase::Drrn), cfg, 4);
    const RunLog log = agent.run_training();
    int prev = 0;
    for (const auto& e : log.episodes) {
        EXPECT_GE(e.max_score, prev);
        EXPECT_GE(e.max_score, e.score);
        prev = e.max_score;
    }
}

TEST(RunTraining, SameSeedReproducesByteIdenticalLogs) {
    auto cfg = tiny_config();
    cfg.total_episodes = 8;
    const GameDef def = testutil::load("memory.game");
    const Variant v = Variant::make(VariantBase::Log);

    namespace fs = std::filesystem;
    std::string paths[2];
    for (int round = 0; round < 2; ++round) {
        DrrnAgent<float> agent(def, v, cfg, 42);
        const RunLog log = agent.run_training();
        paths[round] =
            (fs::temp_directory_path() / ("tgrl_det_" + std::to_string(round) + ".jsonl")).string();
        report::write_runlog(log, def.max_score, paths[round]);
    }
    std::ifstream a(paths[0]), b(paths[1]);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_GT(sa.str().size(), 100u);
    fs::remove(paths[0]);
    fs::remove(paths[1]);
}

TEST(RunTraining, GtVariantsRunAndLogScores) {
    auto cfg = tiny_config();
    cfg.total_episodes = 6;
    const GameDef def = testutil::load("memory.game");
    for (const auto base : {VariantBase::GtState, VariantBase::GtRoom}) {
        DrrnAgent<float> agent(def, Variant::make(base), cfg, 9);
        const RunLog log = agent.run_training();
        EXPECT_EQ(log.episodes.size(), 6u);
    }
}
