#include <tgrl/neural.hpp>

#include "testutil.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace tgrl;
using nn::Graph;
using nn::Mat;
using Id = Graph<double>::Id;

namespace {

nn::Vocab lantern_vocab() { return nn::build_vocab(testutil::load("lantern.game")); }

}  // namespace

TEST(Tokenize, EmptyAndPunctuation) {
    const nn::Vocab v = lantern_vocab();
    EXPECT_TRUE(nn::tokenize("", v).empty());
    const auto toks = nn::tokenize("Take the lantern.", v);
    ASSERT_EQ(toks.size(), 3u);
    EXPECT_EQ(toks[0], v.id("take"));
    EXPECT_EQ(toks[1], v.id("the"));
    EXPECT_EQ(toks[2], v.id("lantern"));
    for (int t : toks) EXPECT_NE(t, nn::Vocab::kUnk);
}

TEST(Tokenize, UnknownMapsToUnk) {
    const nn::Vocab v = lantern_vocab();
    const auto toks = nn::tokenize("xyzzy", v);
    ASSERT_EQ(toks.size(), 1u);
    EXPECT_EQ(toks[0], nn::Vocab::kUnk);
}

TEST(Vocab, CoversEverythingTheGameCanPrint) {
    const GameDef def = testutil::load("memory.game");
    const nn::Vocab v = nn::build_vocab(def);
    Env env(def);
    const auto candidates = testutil::candidate_actions(def);
    Rng rng(11);
    Observation obs = env.reset();
    for (int t = 0; t < 2000; ++t) {
        for (const std::string* s : {&obs.response, &obs.inventory_text, &obs.look_text})
            for (int tok : nn::tokenize(*s, v)) EXPECT_NE(tok, nn::Vocab::kUnk) << *s;
        const StepResult r = env.step(candidates[rng.next_below(candidates.size())]);
        obs = r.observation;
        if (r.done) obs = env.reset();
    }
}

TEST(GruEncode, AllZeroParametersGiveZeroHiddens) {
    nn::GruParams<double> p("g", 4, 3);
    Mat<double> emb("emb", 5, 3);
    Graph<double> g(false);
    const std::vector<int> tokens = {1, 2, 4, 0};
    auto enc = nn::gru_encode(g, emb, p, tokens, 4);
    ASSERT_EQ(enc.token_hiddens.size(), 4u);
    for (auto h : enc.token_hiddens)
        for (int i = 0; i < 4; ++i) EXPECT_EQ(g.val(h)[i], 0.0);
}

TEST(GruEncode, EmptySequenceGivesDefinedZeroHidden) {
    nn::GruParams<double> p("g", 4, 3);
    Mat<double> emb("emb", 5, 3);
    Graph<double> g(false);
    auto enc = nn::gru_encode(g, emb, p, {}, 4);
    EXPECT_TRUE(enc.token_hiddens.empty());
    for (int i = 0; i < 4; ++i) EXPECT_EQ(g.val(enc.final_hidden)[i], 0.0);
}

// Forced gates: z≈1 and ĥ=tanh(x) make h1 = tanh(1) for a unit input.
TEST(GruEncode, ClosedFormSingleToken) {
    nn::GruParams<double> p("g", 1, 1);
    p.bz.w[0] = 100.0;  // z = σ(100) ≈ 1
    p.Wh.w[0] = 1.0;
    Mat<double> emb("emb", 3, 1);
    emb.w = {0.0, 0.0, 1.0};  // token 2 embeds to 1.0
    Graph<double> g(false);
    const std::vector<int> tokens = {2};
    auto enc = nn::gru_encode(g, emb, p, tokens, 1);
    EXPECT_NEAR(g.val(enc.final_hidden)[0], 0.761594155956, 1e-9);
}

// The sequence encoder must equal a hand-rolled fold of the recurrence
// written out with raw graph ops.
TEST(GruEncode, EqualsManualFold) {
    Rng rng(21);
    nn::GruParams<double> p("g", 5, 4);
    for (auto* m : p.mats()) m->init_uniform(rng);
    Mat<double> emb("emb", 9, 4);
    emb.init_uniform(rng);
    const std::vector<int> tokens = {3, 1, 7, 7, 2};

    Graph<double> g(false);
    auto enc = nn::gru_encode(g, emb, p, tokens, 5);

    Graph<double> m(false);
    Id h = m.zeros(5, 1);
    Id table = m.param(emb);
    for (int tok : tokens) {
        Id x = m.row(m.embed(table, std::vector<int>{tok}), 0);
        Id z = m.sigmoid(m.add(m.affine(m.param(p.Wz), x, m.param(p.bz)),
                               m.affine(m.param(p.Uz), h, -1)));
        Id r = m.sigmoid(m.add(m.affine(m.param(p.Wr), x, m.param(p.br)),
                               m.affine(m.param(p.Ur), h, -1)));
        Id hh = m.tanh_op(m.add(m.affine(m.param(p.Wh), x, m.param(p.bh)),
                                m.affine(m.param(p.Uh), m.mul(r, h), -1)));
        // h' = (1−z)⊙h + z⊙ĥ, spelled out
        Id one = m.zeros(5, 1);
        for (int i = 0; i < 5; ++i) m.val(one)[i] = 1.0;
        h = m.add(m.mul(m.sub(one, z), h), m.mul(z, hh));
    }
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(g.val(enc.final_hidden)[i], m.val(h)[i], 1e-12);
}

namespace {

// Projection that copies the summary block c out of [o, c, o⊙c, |o−c|].
nn::BidafParams<double> selector_params(int h) {
    nn::BidafParams<double> p(h);
    for (int i = 0; i < h; ++i) p.W.w[static_cast<std::size_t>(i) * 4 * h + h + i] = 1.0;
    return p;
}

}  // namespace

TEST(Bidaf, SingletonAttentionCopiesTheAction) {
    const int h = 2;
    auto p = selector_params(h);
    Graph<double> g(false);
    Id o1 = g.zeros(h, 1);
    g.val(o1)[0] = 1.0;
    Id a1 = g.zeros(h, 1);
    g.val(a1)[0] = 0.4;
    g.val(a1)[1] = -0.3;
    std::vector<Id> obs{o1}, act{a1};
    Id out = nn::bidaf(g, p, std::span<const Id>(obs), std::span<const Id>(act), 1.0);
    // α = 1 over a single action token, so c = a exactly (slope 1 keeps sign)
    EXPECT_NEAR(g.val(out)[0], 0.4, 1e-12);
    EXPECT_NEAR(g.val(out)[1], -0.3, 1e-12);
}

TEST(Bidaf, TwoActionHandCase) {
    // o1=(1,0), a1=(1,0), a2=(0,1): scores (1,0), α=(e/(e+1), 1/(e+1))
    const int h = 2;
    auto p = selector_params(h);
    Graph<double> g(false);
    Id o1 = g.zeros(h, 1);
    g.val(o1)[0] = 1.0;
    Id a1 = g.zeros(h, 1);
    g.val(a1)[0] = 1.0;
    Id a2 = g.zeros(h, 1);
    g.val(a2)[1] = 1.0;
    std::vector<Id> obs{o1}, act{a1, a2};
    Id out = nn::bidaf(g, p, std::span<const Id>(obs), std::span<const Id>(act), 1.0);
    EXPECT_NEAR(g.val(out)[0], 0.731058578630, 1e-9);
    EXPECT_NEAR(g.val(out)[1], 0.268941421370, 1e-9);
}

TEST(Bidaf, EmptyActionSequenceIsError) {
    auto p = selector_params(2);
    Graph<double> g(false);
    Id o1 = g.zeros(2, 1);
    std::vector<Id> obs{o1}, act;
    EXPECT_THROW(nn::bidaf(g, p, std::span<const Id>(obs), std::span<const Id>(act), 0.01),
                 std::invalid_argument);
}

TEST(QValue, ZeroFinalLayerYieldsBias) {
    nn::MlpParams<double> q("q", 6, 4, 1);
    Rng rng(3);
    q.W1.init_uniform(rng);
    q.b1.init_uniform(rng, 6);
    q.b2.w[0] = 1.25;  // W2 stays zero
    for (int trial = 0; trial < 5; ++trial) {
        Graph<double> g(false);
        Id sr = g.zeros(4, 1);
        Id ar = g.zeros(2, 1);
        for (int i = 0; i < 4; ++i) g.val(sr)[i] = rng.next_normal();
        for (int i = 0; i < 2; ++i) g.val(ar)[i] = rng.next_normal();
        Id out = nn::q_value(g, q, sr, ar, 0.01);
        EXPECT_NEAR(g.scalar(out), 1.25, 1e-12);
    }
}

TEST(InvDyn, SingletonCandidateHasZeroLoss) {
    nn::MlpParams<double> head("inv", 5, 3, 1);
    Rng rng(4);
    for (auto* m : head.mats()) m->init_uniform(rng);
    Graph<double> g(false);
    Id sr = g.zeros(2, 1), nx = g.zeros(2, 1), ar = g.zeros(1, 1);
    std::vector<Id> cands{ar};
    Id loss = nn::inv_dyn_loss(g, head, sr, nx, std::span<const Id>(cands), 0, 0.01);
    EXPECT_NEAR(g.scalar(loss), 0.0, 1e-12);
}

TEST(InvDyn, UniformScoresGiveLogK) {
    nn::MlpParams<double> head("inv", 5, 3, 1);  // all-zero → identical scores
    Graph<double> g(false);
    Id sr = g.zeros(2, 1), nx = g.zeros(2, 1);
    std::vector<Id> cands;
    for (int k = 0; k < 7; ++k) cands.push_back(g.zeros(1, 1));
    Id loss = nn::inv_dyn_loss(g, head, sr, nx, std::span<const Id>(cands), 3, 0.01);
    EXPECT_NEAR(g.scalar(loss), std::log(7.0), 1e-12);
}

TEST(InvDyn, EmptyCandidatesIsError) {
    nn::MlpParams<double> head("inv", 5, 3, 1);
    Graph<double> g(false);
    Id sr = g.zeros(2, 1), nx = g.zeros(2, 1);
    std::vector<Id> cands;
    EXPECT_THROW(nn::inv_dyn_loss(g, head, sr, nx, std::span<const Id>(cands), 0, 0.01),
                 std::invalid_argument);
}

// Composite gradient checks: the full GRU chain, BiDAF, Q head and the
// inverse-dynamics loss (small dims, a few trials; the acceptance suite runs
// the 100-trial version).
TEST(GradCheck, GruSequence) {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        nn::GruParams<double> p("g", 3, 2);
        Mat<double> emb("emb", 6, 2);
        for (auto* m : p.mats()) m->init_uniform(rng);
        emb.init_uniform(rng);
        std::vector<int> tokens;
        const int len = 1 + static_cast<int>(rng.next_below(4));
        for (int i = 0; i < len; ++i) tokens.push_back(static_cast<int>(rng.next_below(6)));
        std::vector<double> probe(3);
        for (auto& v : probe) v = rng.next_normal();

        std::vector<Mat<double>*> params = p.mats();
        params.push_back(&emb);
        const double err = nn::grad_check(std::span<Mat<double>*>(params), [&](Graph<double>& g) {
            auto enc = nn::gru_encode(g, emb, p, tokens, 3);
            Id w = g.constant(3, 1, probe.data());
            return g.dot(enc.final_hidden, w);
        });
        EXPECT_LT(err, 1e-4);
    }
}

TEST(GradCheck, BidafQheadInvdyComposite) {
    Rng rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 3;
        nn::GruParams<double> pgru("g", h, 2);
        Mat<double> emb("emb", 6, 2);
        nn::BidafParams<double> pb(h);
        nn::MlpParams<double> q("q", 2 * h, 4, 1);
        nn::MlpParams<double> inv("inv", 3 * h, 4, 1);
        for (auto* m : pgru.mats()) m->init_uniform(rng);
        emb.init_uniform(rng);
        for (auto* m : pb.mats()) m->init_uniform(rng);
        for (auto* m : q.mats()) m->init_uniform(rng);
        for (auto* m : inv.mats()) m->init_uniform(rng);

        const std::vector<int> obs_toks = {1, 4, 2};
        const std::vector<int> act_toks = {5, 0};
        const std::vector<int> alt_toks = {3};

        std::vector<Mat<double>*> params = pgru.mats();
        params.push_back(&emb);
        for (auto* m : pb.mats()) params.push_back(m);
        for (auto* m : q.mats()) params.push_back(m);
        for (auto* m : inv.mats()) params.push_back(m);

        const double err = nn::grad_check(std::span<Mat<double>*>(params), [&](Graph<double>& g) {
            auto obs = nn::gru_encode(g, emb, pgru, obs_toks, h);
            auto act = nn::gru_encode(g, emb, pgru, act_toks, h);
            auto alt = nn::gru_encode(g, emb, pgru, alt_toks, h);
            Id sr = nn::bidaf(g, pb, std::span<const Id>(obs.token_hiddens),
                              std::span<const Id>(act.token_hiddens), 0.01);
            Id qv = nn::q_value(g, q, sr, act.final_hidden, 0.01);
            std::vector<Id> cands{act.final_hidden, alt.final_hidden};
            Id il = nn::inv_dyn_loss(g, inv, sr, sr, std::span<const Id>(cands), 1, 0.01);
            return g.add(g.squared_error(qv, 0.5), il);
        });
        EXPECT_LT(err, 1e-4);
    }
}

TEST(Checkpoint, RoundTripsBitExactly) {
    nn::Dims d;
    d.emb = 4;
    d.gru_hidden = 6;
    d.qhead_hidden = 8;
    d.invdy_hidden = 8;
    nn::EncoderParams<float> p(d, 11, 3 * 6, 6, 3 * 6);
    p.init(77);
    const std::string path =
        (std::filesystem::temp_directory_path() / "tgrl_ckpt_test.bin").string();
    nn::save_params(p, 0xabcdefull, path);

    nn::EncoderParams<float> q;
    const auto vocab_hash = nn::load_params(q, path);
    EXPECT_EQ(vocab_hash, 0xabcdefull);
    auto pm = p.all_mats();
    auto qm = q.all_mats();
    ASSERT_EQ(pm.size(), qm.size());
    for (std::size_t i = 0; i < pm.size(); ++i) {
        EXPECT_EQ(pm[i]->name, qm[i]->name);
        ASSERT_EQ(pm[i]->w.size(), qm[i]->w.size());
        for (std::size_t k = 0; k < pm[i]->w.size(); ++k) EXPECT_EQ(pm[i]->w[k], qm[i]->w[k]);
    }
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
    const auto path = (std::filesystem::temp_directory_path() / "tgrl_ckpt_bad.bin").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a checkpoint at all";
    }
    nn::EncoderParams<float> p;
    EXPECT_THROW(nn::load_params(p, path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST(EncoderParams, CountIsFiniteAndLogged) {
    nn::Dims d;
    d.emb = 8;
    d.gru_hidden = 10;
    nn::EncoderParams<float> p(d, 20, 30, 10, 30);
    p.init(1);
    EXPECT_GT(p.parameter_count(), 1000u);
    for (auto* m : p.all_mats())
        for (float v : m->w) EXPECT_TRUE(std::isfinite(v));
}
