#pragma once
// Encoder stack: vocabulary + tokenizer, four GRU encoders (one each for the
// action response, inventory, look and action texts), action-attended
// observation pooling, the Q head, and the inverse-dynamics head.

#include <tgrl/engine.hpp>
#include <tgrl/tensor.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tgrl::nn {

struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    std::map<std::string, int> index;  // token -> id (ids start at 2)

    int size() const { return static_cast<int>(index.size()) + 2; }

    int id(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? kUnk : it->second;
    }

    // Stable content hash, recorded in checkpoints.
    std::uint64_t content_hash() const {
        std::string blob;
        for (const auto& [tok, _] : index) blob += tok + "\n";
        return str_hash(blob);
    }
};

// Lower-cased alphanumeric word tokens; punctuation separates.
inline std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<int> out;
    for (const auto& tok : tokenize_words(text)) out.push_back(vocab.id(tok));
    return out;
}

// Built once per run from everything the game can ever print.
inline Vocab build_vocab(const GameDef& def) {
    Vocab v;
    int next = 2;
    for (const auto& text : text_corpus(def))
        for (const auto& tok : tokenize_words(text))
            if (!v.index.count(tok)) v.index[tok] = next++;
    // map iteration is sorted; reassign ids in sorted order for stability
    next = 2;
    for (auto& [tok, id] : v.index) id = next++;
    return v;
}

struct Dims {
    int emb = 64;
    int gru_hidden = 128;
    int qhead_hidden = 256;
    int invdy_hidden = 128;
    double leaky_slope = 0.01;
};

template <typename T>
struct GruParams {
    Mat<T> Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;

    GruParams() = default;
    GruParams(const std::string& prefix, int hidden, int input)
        : Wz(prefix + ".Wz", hidden, input), Uz(prefix + ".Uz", hidden, hidden),
          bz(prefix + ".bz", hidden, 1), Wr(prefix + ".Wr", hidden, input),
          Ur(prefix + ".Ur", hidden, hidden), br(prefix + ".br", hidden, 1),
          Wh(prefix + ".Wh", hidden, input), Uh(prefix + ".Uh", hidden, hidden),
          bh(prefix + ".bh", hidden, 1) {}

    std::vector<Mat<T>*> mats() { return {&Wz, &Uz, &bz, &Wr, &Ur, &br, &Wh, &Uh, &bh}; }
};

// Parameter leaves for one GRU, bound once per graph build.
template <typename T>
struct GruIds {
    typename Graph<T>::Id Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;
    GruIds(Graph<T>& g, GruParams<T>& p)
        : Wz(g.param(p.Wz)), Uz(g.param(p.Uz)), bz(g.param(p.bz)), Wr(g.param(p.Wr)),
          Ur(g.param(p.Ur)), br(g.param(p.br)), Wh(g.param(p.Wh)), Uh(g.param(p.Uh)),
          bh(g.param(p.bh)) {}
};

// One step of the recurrence:
//   z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
//   ĥ = tanh(Wh x + Uh (r⊙h) + bh), h' = (1−z)⊙h + z⊙ĥ
template <typename T>
typename Graph<T>::Id gru_step(Graph<T>& g, const GruIds<T>& p, typename Graph<T>::Id x,
                               typename Graph<T>::Id h) {
    using Id = typename Graph<T>::Id;
    Id z = g.sigmoid(g.affine2(p.Wz, x, p.Uz, h, p.bz));
    Id r = g.sigmoid(g.affine2(p.Wr, x, p.Ur, h, p.br));
    Id hh = g.tanh_op(g.affine2(p.Wh, x, p.Uh, g.mul(r, h), p.bh));
    return g.gru_mix(z, h, hh);
}

template <typename T>
typename Graph<T>::Id gru_step(Graph<T>& g, GruParams<T>& p, typename Graph<T>::Id x,
                               typename Graph<T>::Id h) {
    return gru_step(g, GruIds<T>(g, p), x, h);
}

template <typename T>
struct GruEncoding {
    typename Graph<T>::Id final_hidden;
    std::vector<typename Graph<T>::Id> token_hiddens;
};

// Runs the GRU over embedded tokens, h0 = 0. Empty input yields a zero final
// hidden and no token hiddens.
template <typename T>
GruEncoding<T> gru_encode(Graph<T>& g, Mat<T>& embedding, GruParams<T>& p,
                          std::span<const int> tokens, int hidden) {
    GruEncoding<T> out;
    typename Graph<T>::Id h = g.zeros(hidden, 1);
    if (tokens.empty()) {
        out.final_hidden = h;
        return out;
    }
    typename Graph<T>::Id emb = g.embed(g.param(embedding), tokens);
    const GruIds<T> ids(g, p);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        h = gru_step(g, ids, g.row(emb, static_cast<int>(t)), h);
        out.token_hiddens.push_back(h);
    }
    out.final_hidden = h;
    return out;
}

template <typename T>
struct BidafParams {
    Mat<T> W;  // hidden × 4·hidden
    Mat<T> b;  // hidden

    BidafParams() = default;
    BidafParams(int hidden)
        : W("bidaf.W", hidden, 4 * hidden), b("bidaf.b", hidden, 1) {}

    std::vector<Mat<T>*> mats() { return {&W, &b}; }
};

// Action-attended observation summary. Scores a_ij = o_i·a_j, row-softmax
// weights, summary c_i = Σ_j α_ij a_j, features [o, c, o⊙c, |o−c|] through a
// linear layer with leaky ReLU, mean-pooled over observation tokens.
template <typename T>
typename Graph<T>::Id bidaf(Graph<T>& g, BidafParams<T>& p,
                            std::span<const typename Graph<T>::Id> obs_hiddens,
                            std::span<const typename Graph<T>::Id> act_hiddens,
                            double leaky_slope) {
    if (obs_hiddens.empty() || act_hiddens.empty())
        throw std::invalid_argument("bidaf: empty token sequence");
    using Id = typename Graph<T>::Id;
    Id O = g.stack_rows(obs_hiddens);
    Id A = g.stack_rows(act_hiddens);
    Id scores = g.matmul_nt(O, A);
    Id alpha = g.softmax_rows(scores);
    Id C = g.matmul_nn(alpha, A);
    Id feats = g.concat_cols({O, C, g.mul(O, C), g.abs(g.sub(O, C))});
    Id proj = g.add_rowvec(g.matmul_nt(feats, g.param(p.W)), g.param(p.b));
    Id act = g.leaky_relu(proj, static_cast<T>(leaky_slope));
    return g.mean_rows(act);
}

template <typename T>
struct MlpParams {
    Mat<T> W1, b1, W2, b2;

    MlpParams() = default;
    MlpParams(const std::string& prefix, int input, int hidden, int output)
        : W1(prefix + ".W1", hidden, input), b1(prefix + ".b1", hidden, 1),
          W2(prefix + ".W2", output, hidden), b2(prefix + ".b2", output, 1) {}

    std::vector<Mat<T>*> mats() { return {&W1, &b1, &W2, &b2}; }
};

template <typename T>
typename Graph<T>::Id mlp(Graph<T>& g, MlpParams<T>& p, typename Graph<T>::Id x,
                          double leaky_slope) {
    using Id = typename Graph<T>::Id;
    Id h = g.leaky_relu(g.affine(g.param(p.W1), x, g.param(p.b1)), static_cast<T>(leaky_slope));
    return g.affine(g.param(p.W2), h, g.param(p.b2));
}

// Q(c, a) = MLP([sr, ar])
template <typename T>
typename Graph<T>::Id q_value(Graph<T>& g, MlpParams<T>& qhead, typename Graph<T>::Id sr,
                              typename Graph<T>::Id ar, double leaky_slope) {
    return mlp(g, qhead, g.concat({sr, ar}), leaky_slope);
}

// Cross-entropy over candidate actions given consecutive state reps; each
// candidate is scored by an MLP over [sr_t, sr_next, ar_candidate].
template <typename T>
typename Graph<T>::Id inv_dyn_loss(Graph<T>& g, MlpParams<T>& head, typename Graph<T>::Id sr_t,
                                   typename Graph<T>::Id sr_next,
                                   std::span<const typename Graph<T>::Id> candidate_action_reps,
                                   int taken_index, double leaky_slope) {
    if (candidate_action_reps.empty())
        throw std::invalid_argument("inv_dyn_loss: empty candidate set");
    using Id = typename Graph<T>::Id;
    std::vector<Id> scores;
    scores.reserve(candidate_action_reps.size());
    for (Id ar : candidate_action_reps)
        scores.push_back(mlp(g, head, g.concat({sr_t, sr_next, ar}), leaky_slope));
    Id logits = g.concat(std::span<const Id>(scores));
    return g.cross_entropy_logits(logits, taken_index);
}

// The full parameter stack. All four GRUs always exist; variants that do not
// use a component simply never touch its parameters.
template <typename T>
struct EncoderParams {
    Dims dims;
    int vocab_size = 0;
    int sr_dim = 0, ar_dim = 0, sr_base_dim = 0;

    Mat<T> embedding;
    GruParams<T> gru_obs, gru_inv, gru_look, gru_act;
    BidafParams<T> bidaf_p;
    MlpParams<T> qhead;
    MlpParams<T> invdy;

    EncoderParams() = default;
    EncoderParams(const Dims& d, int vocab, int sr, int ar, int sr_base)
        : dims(d), vocab_size(vocab), sr_dim(sr), ar_dim(ar), sr_base_dim(sr_base),
          embedding("embedding", vocab, d.emb),
          gru_obs("gru_obs", d.gru_hidden, d.emb), gru_inv("gru_inv", d.gru_hidden, d.emb),
          gru_look("gru_look", d.gru_hidden, d.emb), gru_act("gru_act", d.gru_hidden, d.emb),
          bidaf_p(d.gru_hidden),
          qhead("qhead", sr + ar, d.qhead_hidden, 1),
          invdy("invdy", 2 * sr_base + ar, d.invdy_hidden, 1) {}

    std::vector<Mat<T>*> all_mats() {
        std::vector<Mat<T>*> out{&embedding};
        for (auto* g : {&gru_obs, &gru_inv, &gru_look, &gru_act})
            for (auto* m : g->mats()) out.push_back(m);
        for (auto* m : bidaf_p.mats()) out.push_back(m);
        for (auto* m : qhead.mats()) out.push_back(m);
        for (auto* m : invdy.mats()) out.push_back(m);
        return out;
    }

    std::vector<Mat<T>*> text_encoder_mats() {
        std::vector<Mat<T>*> out{&embedding};
        for (auto* g : {&gru_obs, &gru_inv, &gru_look, &gru_act})
            for (auto* m : g->mats()) out.push_back(m);
        for (auto* m : bidaf_p.mats()) out.push_back(m);
        return out;
    }

    void init(std::uint64_t seed) {
        Rng rng(seed);
        for (auto* m : all_mats()) m->init_uniform(rng);
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* m : all_mats()) n += m->size();
        return n;
    }
};

// ---- checkpoint io ---------------------------------------------------------
// Layout: magic, format version, dtype size, dims, vocab hash, then each
// parameter as (name length, name, rows, cols, raw values).

inline constexpr char kCheckpointMagic[8] = {'T', 'G', 'R', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void save_params(EncoderParams<T>& p, std::uint64_t vocab_hash, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    auto w32 = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    w32(1);  // format version
    w32(static_cast<std::int32_t>(sizeof(T)));
    w32(p.dims.emb);
    w32(p.dims.gru_hidden);
    w32(p.dims.qhead_hidden);
    w32(p.dims.invdy_hidden);
    w32(p.vocab_size);
    w32(p.sr_dim);
    w32(p.ar_dim);
    w32(p.sr_base_dim);
    w64(vocab_hash);
    auto mats = p.all_mats();
    w32(static_cast<std::int32_t>(mats.size()));
    for (auto* m : mats) {
        w32(static_cast<std::int32_t>(m->name.size()));
        out.write(m->name.data(), static_cast<std::streamsize>(m->name.size()));
        w32(m->rows);
        w32(m->cols);
        out.write(reinterpret_cast<const char*>(m->w.data()),
                  static_cast<std::streamsize>(m->w.size() * sizeof(T)));
    }
}

template <typename T>
std::uint64_t load_params(EncoderParams<T>& p, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw std::runtime_error("not a checkpoint file: " + path);
    auto r32 = [&] {
        std::int32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r64 = [&] {
        std::uint64_t v;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    if (r32() != 1) throw std::runtime_error("unsupported checkpoint version");
    if (r32() != static_cast<std::int32_t>(sizeof(T)))
        throw std::runtime_error("checkpoint dtype width mismatch");
    Dims d;
    d.emb = r32();
    d.gru_hidden = r32();
    d.qhead_hidden = r32();
    d.invdy_hidden = r32();
    const int vocab = r32();
    const int sr = r32();
    const int ar = r32();
    const int sr_base = r32();
    const std::uint64_t vocab_hash = r64();
    p = EncoderParams<T>(d, vocab, sr, ar, sr_base);
    const int n_mats = r32();
    auto mats = p.all_mats();
    if (n_mats != static_cast<int>(mats.size()))
        throw std::runtime_error("checkpoint parameter count mismatch");
    for (auto* m : mats) {
        const int name_len = r32();
        std::string name(static_cast<std::size_t>(name_len), '\0');
        in.read(name.data(), name_len);
        if (name != m->name) throw std::runtime_error("checkpoint parameter order mismatch: " + name);
        const int rows = r32(), cols = r32();
        if (rows != m->rows || cols != m->cols)
            throw std::runtime_error("checkpoint shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(m->w.data()),
                static_cast<std::streamsize>(m->w.size() * sizeof(T)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return vocab_hash;
}

}  // namespace tgrl::nn
