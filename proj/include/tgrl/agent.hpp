#pragma once
// DRRN agent with pluggable state representations: plain GRU encodings,
// observation hashes, location-graph hashes (po1/po2), and the ground-truth
// state/room oracles, plus the attention and inverse-dynamics extensions.

#include <tgrl/engine.hpp>
#include <tgrl/hashing.hpp>
#include <tgrl/locgraph.hpp>
#include <tgrl/neural.hpp>
#include <tgrl/tensor.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgrl::rl {

enum class VariantBase { Drrn, ObsHash, DrrnInvdy, Log, GtState, GtRoom };

struct Variant {
    VariantBase base = VariantBase::Drrn;
    bool text_enc = true;
    bool att = false;
    bool invdy = false;
    bool use_po1 = false;
    bool use_po2 = false;

    static Variant make(VariantBase base) {
        Variant v;
        v.base = base;
        switch (base) {
            case VariantBase::Drrn:
                break;
            case VariantBase::ObsHash:
                v.text_enc = false;
                break;
            case VariantBase::DrrnInvdy:
                v.invdy = true;
                break;
            case VariantBase::Log:
                v.att = v.invdy = v.use_po1 = v.use_po2 = true;
                break;
            case VariantBase::GtState:
            case VariantBase::GtRoom:
                v.att = v.invdy = true;
                break;
        }
        return v;
    }

    static Variant parse(const std::string& name) {
        if (name == "drrn") return make(VariantBase::Drrn);
        if (name == "obs_hash") return make(VariantBase::ObsHash);
        if (name == "drrn_invdy") return make(VariantBase::DrrnInvdy);
        if (name == "log") return make(VariantBase::Log);
        if (name == "gt_state") return make(VariantBase::GtState);
        if (name == "gt_room") return make(VariantBase::GtRoom);
        throw std::invalid_argument("unknown variant: " + name);
    }

    std::string base_name() const {
        switch (base) {
            case VariantBase::Drrn: return "drrn";
            case VariantBase::ObsHash: return "obs_hash";
            case VariantBase::DrrnInvdy: return "drrn_invdy";
            case VariantBase::Log: return "log";
            case VariantBase::GtState: return "gt_state";
            case VariantBase::GtRoom: return "gt_room";
        }
        return "?";
    }

    std::string name() const {
        std::string n = base_name();
        const Variant d = make(base);
        if (text_enc != d.text_enc) n += text_enc ? "+text_enc" : "-text_enc";
        if (att != d.att) n += att ? "+att" : "-att";
        if (invdy != d.invdy) n += invdy ? "+invdy" : "-invdy";
        if (use_po1 != d.use_po1) n += use_po1 ? "+po1" : "-po1";
        if (use_po2 != d.use_po2) n += use_po2 ? "+po2" : "-po2";
        return n;
    }

    void validate() const {
        const bool po = use_po1 || use_po2;
        switch (base) {
            case VariantBase::Drrn:
            case VariantBase::DrrnInvdy:
                if (!text_enc)
                    throw std::invalid_argument(base_name() + " requires the text encoder");
                if (po) throw std::invalid_argument(base_name() + " cannot use po1/po2");
                break;
            case VariantBase::ObsHash:
                if (text_enc)
                    throw std::invalid_argument("obs_hash replaces the text encoder with hashes");
                if (po) throw std::invalid_argument("obs_hash cannot use po1/po2");
                break;
            case VariantBase::Log:
                break;
            case VariantBase::GtState:
            case VariantBase::GtRoom:
                if (po)
                    throw std::invalid_argument(base_name() + " replaces po1/po2 with ground truth");
                break;
        }
        if (att && !text_enc)
            throw std::invalid_argument("attention requires the text encoder");
        if (!text_enc && base != VariantBase::ObsHash && base != VariantBase::Log &&
            base != VariantBase::GtState && base != VariantBase::GtRoom)
            throw std::invalid_argument("-text_enc leaves this variant with an empty state rep");
        if (!text_enc && base == VariantBase::Log && !use_po1 && !use_po2)
            throw std::invalid_argument("log -text_enc -po1 -po2 has an empty state rep");
    }

    bool uses_hash_obs() const { return base == VariantBase::ObsHash; }
    bool uses_gt_state() const { return base == VariantBase::GtState; }
    bool uses_gt_room() const { return base == VariantBase::GtRoom; }
    bool needs_location_map() const { return base == VariantBase::Log && use_po2; }
    bool needs_locate() const { return base == VariantBase::Log && (use_po1 || use_po2); }
};

struct TrainConfig {
    double gamma = 0.9;
    double tau = 1.0;
    double lr = 1e-3;
    double invdy_lambda = 1.0;
    double grad_clip = 5.0;
    int batch_size = 32;
    int buffer_capacity = 100000;
    int max_episode_steps = 100;
    int num_envs = 8;
    int total_episodes = 1000;
    int locate_depth = 1;
    int hash_dim = 128;
    nn::Dims dims;
    int eval_cadence = 0;  // 0 disables periodic eval episodes
    bool eval_greedy = true;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
        if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
        if (batch_size <= 0 || buffer_capacity <= 0 || num_envs <= 0 || total_episodes <= 0 ||
            max_episode_steps <= 0 || hash_dim <= 0 || locate_depth <= 0)
            throw std::invalid_argument("train config values must be positive");
    }
};

// Raw per-state inputs. Transitions keep these (token ids and fixed hash
// vectors), never encoded vectors, so encoder updates apply retroactively.
template <typename T>
struct StateInput {
    std::vector<int> o, i, l;  // token ids, only filled when text_enc
    std::vector<T> extra;      // fixed hash components, per variant
};

template <typename T>
struct ActionInput {
    std::string text;
    std::vector<int> tokens;  // when text_enc
    std::vector<T> hash;      // when !text_enc
};

template <typename T>
struct Transition {
    StateInput<T> state;
    ActionInput<T> action;
    double reward = 0;
    StateInput<T> next_state;
    std::vector<ActionInput<T>> next_valid;  // empty iff done
    std::vector<ActionInput<T>> cur_valid;   // candidates at decision time
    int taken_index = -1;                    // index of `action` in cur_valid
    bool done = false;
};

template <typename T>
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition<T>&& tr) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(tr));
        } else {
            data_[head_] = std::move(tr);
            head_ = (head_ + 1) % capacity_;
        }
    }

    const Transition<T>& sample(Rng& rng) const {
        if (data_.empty()) throw std::logic_error("sampling an empty replay buffer");
        return data_[rng.next_below(data_.size())];
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition<T>& at(std::size_t i) const { return data_[i]; }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // oldest entry once full
    std::vector<Transition<T>> data_;
};

inline std::vector<double> boltzmann_probs(std::span<const double> q_values, double tau) {
    std::vector<double> p(q_values.size());
    double mx = q_values[0];
    for (double q : q_values) mx = std::max(mx, q);
    double sum = 0;
    for (std::size_t i = 0; i < q_values.size(); ++i) {
        p[i] = std::exp((q_values[i] - mx) / tau);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Boltzmann selection: p(a) ∝ exp(Q(a)/τ). Greedy mode takes the argmax with
// lowest-index tie-break.
inline int select_action(std::span<const double> q_values, double tau, Rng& rng,
                         bool greedy = false) {
    if (q_values.empty()) throw std::invalid_argument("select_action: no actions");
    if (greedy) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(q_values.size()); ++i)
            if (q_values[i] > q_values[best]) best = i;
        return best;
    }
    std::vector<double> p = boltzmann_probs(q_values, tau);
    double u = rng.next_real();
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
        u -= p[i];
        if (u < 0) return i;
    }
    return static_cast<int>(p.size()) - 1;
}

template <typename T>
class Adam {
public:
    Adam(std::vector<nn::Mat<T>*> params, double lr)
        : params_(std::move(params)), lr_(lr) {
        for (auto* p : params_) {
            m_.emplace_back(p->size(), T(0));
            v_.emplace_back(p->size(), T(0));
        }
    }

    void set_lr(double lr) { lr_ = lr; }

    // One update from accumulated gradients, with global-norm clipping.
    void step(double clip) {
        double norm_sq = 0;
        for (auto* p : params_)
            for (T g : p->g) norm_sq += static_cast<double>(g) * static_cast<double>(g);
        const double norm = std::sqrt(norm_sq);
        const double scale = (clip > 0 && norm > clip) ? clip / norm : 1.0;

        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = *params_[pi];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double g = static_cast<double>(p.g[i]) * scale;
                m_[pi][i] = static_cast<T>(kBeta1 * m_[pi][i] + (1 - kBeta1) * g);
                v_[pi][i] = static_cast<T>(kBeta2 * v_[pi][i] + (1 - kBeta2) * g * g);
                const double mhat = m_[pi][i] / bc1;
                const double vhat = v_[pi][i] / bc2;
                p.w[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + kEps));
            }
            p.zero_grad();
        }
    }

private:
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    std::vector<nn::Mat<T>*> params_;
    std::vector<std::vector<T>> m_, v_;
    double lr_;
    long t_ = 0;
};

struct EpisodeRecord {
    int episode = 0;
    int score = 0;
    int max_score = 0;  // maximum episode score seen so far in the run
    int steps = 0;
    double td_loss = 0;
    double invdy_loss = 0;
};

struct RunLog {
    std::string game, variant;
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> episodes;
    std::vector<EpisodeRecord> evals;
    double wall_seconds = 0;

    double mean_final_score(int window = 100) const {
        if (episodes.empty()) return 0;
        const int n = static_cast<int>(episodes.size());
        const int k = std::min(window, n);
        double sum = 0;
        for (int i = n - k; i < n; ++i) sum += episodes[i].score;
        return sum / k;
    }
    int max_explored_score() const {
        return episodes.empty() ? 0 : episodes.back().max_score;
    }
};

struct Losses {
    double td = 0, invdy = 0, total = 0;
};

// Everything one training run needs: env fleet, parameters, optimizer,
// replay, and the per-variant representation plumbing.
template <typename T = float>
class DrrnAgent {
public:
    DrrnAgent(const GameDef& game, Variant variant, TrainConfig cfg, std::uint64_t seed)
        : variant_(variant), cfg_(std::move(cfg)), game_(game),
          vocab_(nn::build_vocab(game)),
          hash_cfg_{cfg_.hash_dim, "splitmix64-boxmuller"},
          act_rng_(str_hash("act") ^ seed), replay_rng_(str_hash("replay") ^ seed),
          eval_rng_(str_hash("eval") ^ seed), seed_(seed),
          buffer_(static_cast<std::size_t>(cfg_.buffer_capacity)) {
        variant_.validate();
        cfg_.validate();
        const int h = cfg_.dims.gru_hidden;
        const int text_dim = variant_.text_enc ? 3 * h : 0;
        int extra = 0;
        if (variant_.uses_hash_obs()) extra = 3 * cfg_.hash_dim;
        if (variant_.base == VariantBase::Log)
            extra = (variant_.use_po1 ? cfg_.hash_dim : 0) + (variant_.use_po2 ? cfg_.hash_dim : 0);
        if (variant_.uses_gt_state() || variant_.uses_gt_room()) extra = cfg_.hash_dim;
        sr_dim_ = text_dim + extra;
        extra_dim_ = extra;
        ar_dim_ = variant_.text_enc ? h : cfg_.hash_dim;
        params_ = nn::EncoderParams<T>(cfg_.dims, vocab_.size(), sr_dim_, ar_dim_, sr_dim_);
        params_.init(str_hash("init") ^ seed);
        adam_.emplace(params_.all_mats(), cfg_.lr);
    }

    const Variant& variant() const { return variant_; }
    const TrainConfig& config() const { return cfg_; }
    nn::EncoderParams<T>& params() { return params_; }
    const nn::Vocab& vocab() const { return vocab_; }
    ReplayBuffer<T>& buffer() { return buffer_; }
    int sr_dim() const { return sr_dim_; }
    int ar_dim() const { return ar_dim_; }

    // ---- representation assembly ------------------------------------------

    std::vector<int> tokens_or_unk(const std::string& text) const {
        auto t = nn::tokenize(text, vocab_);
        if (t.empty()) t.push_back(nn::Vocab::kUnk);
        return t;
    }

    // Assemble the raw state inputs for the current env state. For po2 the
    // location map must already be updated this step.
    StateInput<T> build_state_input(Env& env, const Observation& obs, const LocationMap& map,
                                    const std::string& po1_key) {
        StateInput<T> s;
        if (variant_.text_enc) {
            s.o = tokens_or_unk(obs.response);
            s.i = tokens_or_unk(obs.inventory_text);
            s.l = tokens_or_unk(obs.look_text);
        }
        auto append_hash = [&](const std::string& text) {
            HashVector hv = hash_vec(text, hash_cfg_);
            for (double v : hv.values) s.extra.push_back(static_cast<T>(v));
        };
        if (variant_.uses_hash_obs()) {
            append_hash(obs.response);
            append_hash(obs.inventory_text);
            append_hash(obs.look_text);
        } else if (variant_.base == VariantBase::Log) {
            if (variant_.use_po1) append_hash(po1_key);
            if (variant_.use_po2) append_hash(serialize_map(map));
        } else if (variant_.uses_gt_state()) {
            append_hash(std::to_string(env.gt_state_hash()));
        } else if (variant_.uses_gt_room()) {
            append_hash(env.gt_room_id());
        }
        return s;
    }

    ActionInput<T> build_action_input(const std::string& action) {
        ActionInput<T> a;
        a.text = action;
        if (variant_.text_enc) {
            a.tokens = tokens_or_unk(action);
        } else {
            HashVector hv = hash_vec(action, hash_cfg_);
            a.hash.assign(hv.values.begin(), hv.values.end());
        }
        return a;
    }

    // ---- graph building ------------------------------------------------------

    struct EncodedState {
        typename nn::Graph<T>::Id extras = -1;  // -1 when the variant has none
        nn::GruEncoding<T> o, i, l;
        bool has_text = false;
    };

    EncodedState encode_state(nn::Graph<T>& g, const StateInput<T>& s) {
        EncodedState e;
        if (variant_.text_enc) {
            e.has_text = true;
            e.o = nn::gru_encode(g, params_.embedding, params_.gru_obs, s.o, cfg_.dims.gru_hidden);
            e.i = nn::gru_encode(g, params_.embedding, params_.gru_inv, s.i, cfg_.dims.gru_hidden);
            e.l = nn::gru_encode(g, params_.embedding, params_.gru_look, s.l, cfg_.dims.gru_hidden);
        }
        if (!s.extra.empty()) e.extras = g.constant_vec(std::span<const T>(s.extra));
        return e;
    }

    struct EncodedAction {
        typename nn::Graph<T>::Id rep = -1;
        nn::GruEncoding<T> enc;  // token hiddens for attention
    };

    EncodedAction encode_action(nn::Graph<T>& g, const ActionInput<T>& a) {
        EncodedAction e;
        if (variant_.text_enc) {
            e.enc = nn::gru_encode(g, params_.embedding, params_.gru_act, a.tokens,
                                   cfg_.dims.gru_hidden);
            e.rep = e.enc.final_hidden;
        } else {
            e.rep = g.constant_vec(std::span<const T>(a.hash));
        }
        return e;
    }

    // State rep for a (state, action) pair: attended when the variant uses
    // BiDAF, otherwise the plain GRU finals, plus the fixed hash extras.
    typename nn::Graph<T>::Id state_rep(nn::Graph<T>& g, const EncodedState& s,
                                        const EncodedAction& a) {
        std::vector<typename nn::Graph<T>::Id> parts;
        if (s.has_text) {
            if (variant_.att) {
                for (const auto* enc : {&s.o, &s.i, &s.l})
                    parts.push_back(nn::bidaf(g, params_.bidaf_p,
                                              std::span<const typename nn::Graph<T>::Id>(enc->token_hiddens),
                                              std::span<const typename nn::Graph<T>::Id>(a.enc.token_hiddens),
                                              cfg_.dims.leaky_slope));
            } else {
                parts.push_back(s.o.final_hidden);
                parts.push_back(s.i.final_hidden);
                parts.push_back(s.l.final_hidden);
            }
        }
        if (s.extras >= 0) parts.push_back(s.extras);
        return g.concat(std::span<const typename nn::Graph<T>::Id>(parts));
    }

    // Action-independent state rep (plain GRU finals); the inverse-dynamics
    // head scores candidates against this even when Q uses attention.
    typename nn::Graph<T>::Id state_rep_plain(nn::Graph<T>& g, const EncodedState& s) {
        std::vector<typename nn::Graph<T>::Id> parts;
        if (s.has_text) {
            parts.push_back(s.o.final_hidden);
            parts.push_back(s.i.final_hidden);
            parts.push_back(s.l.final_hidden);
        }
        if (s.extras >= 0) parts.push_back(s.extras);
        return g.concat(std::span<const typename nn::Graph<T>::Id>(parts));
    }

    std::vector<double> q_values(const StateInput<T>& state,
                                 std::span<const ActionInput<T>> actions) {
        nn::Graph<T> g(false);
        EncodedState es = encode_state(g, state);
        std::vector<double> out;
        out.reserve(actions.size());
        for (const auto& a : actions) {
            EncodedAction ea = encode_action(g, a);
            auto q = nn::q_value(g, params_.qhead, state_rep(g, es, ea), ea.rep,
                                 cfg_.dims.leaky_slope);
            out.push_back(static_cast<double>(g.scalar(q)));
        }
        return out;
    }

    // r when done, else r + γ·max over next valid actions; evaluated with the
    // parameters as they stand (callers run this before the update).
    double td_target(const Transition<T>& tr) {
        if (tr.done || tr.next_valid.empty()) return tr.reward;
        auto q = q_values(tr.next_state, std::span<const ActionInput<T>>(tr.next_valid));
        return tr.reward + cfg_.gamma * *std::max_element(q.begin(), q.end());
    }

    Losses train_step(std::span<const Transition<T>* const> batch) {
        // Targets first, against frozen (pre-update) parameters.
        std::vector<double> targets;
        targets.reserve(batch.size());
        for (const auto* tr : batch) targets.push_back(td_target(*tr));

        nn::Graph<T> g(true);
        typename nn::Graph<T>::Id td_sum = g.zeros(1, 1);
        typename nn::Graph<T>::Id inv_sum = g.zeros(1, 1);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Transition<T>& tr = *batch[b];
            EncodedState es = encode_state(g, tr.state);
            EncodedAction ea = encode_action(g, tr.action);
            auto q = nn::q_value(g, params_.qhead, state_rep(g, es, ea), ea.rep,
                                 cfg_.dims.leaky_slope);
            td_sum = g.add(td_sum, g.squared_error(q, static_cast<T>(targets[b])));

            if (variant_.invdy && !tr.cur_valid.empty() && tr.taken_index >= 0) {
                EncodedState ns = encode_state(g, tr.next_state);
                std::vector<typename nn::Graph<T>::Id> cand;
                cand.reserve(tr.cur_valid.size());
                for (const auto& c : tr.cur_valid) cand.push_back(encode_action(g, c).rep);
                inv_sum = g.add(inv_sum,
                                nn::inv_dyn_loss(g, params_.invdy, state_rep_plain(g, es),
                                                 state_rep_plain(g, ns),
                                                 std::span<const typename nn::Graph<T>::Id>(cand),
                                                 tr.taken_index, cfg_.dims.leaky_slope));
            }
        }
        const T inv_n = T(1) / static_cast<T>(batch.size());
        auto td_loss = g.scale(td_sum, inv_n);
        auto inv_loss = g.scale(inv_sum, inv_n);
        auto total = g.add(td_loss, g.scale(inv_loss, static_cast<T>(cfg_.invdy_lambda)));

        Losses out;
        out.td = g.scalar(td_loss);
        out.invdy = g.scalar(inv_loss);
        out.total = g.scalar(total);
        if (!std::isfinite(out.total))
            throw std::runtime_error("non-finite loss; aborting run (td=" + std::to_string(out.td) +
                                     " invdy=" + std::to_string(out.invdy) + ")");
        g.backward(total);
        adam_->step(cfg_.grad_clip);
        return out;
    }

    Losses train_step_from_buffer() {
        std::vector<const Transition<T>*> batch;
        batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
        for (int i = 0; i < cfg_.batch_size; ++i) batch.push_back(&buffer_.sample(replay_rng_));
        return train_step(std::span<const Transition<T>* const>(batch));
    }

    Rng& act_rng() { return act_rng_; }
    Rng& eval_rng() { return eval_rng_; }
    const HashConfig& hash_config() const { return hash_cfg_; }

    // ---- the training loop ---------------------------------------------------

    RunLog run_training() {
        const auto t0 = std::chrono::steady_clock::now();
        RunLog log;
        log.game = game_.name;
        log.variant = variant_.name();
        log.seed = seed_;

        struct EnvSlot {
            Env env;
            LocationMap map;
            StateInput<T> cur_state;
            std::vector<std::string> valid;
            std::vector<ActionInput<T>> valid_inputs;
            Observation obs;
            int steps = 0;
            int episode_score = 0;
            double td_sum_at_start = 0;
            double inv_sum_at_start = 0;
            long loss_count_at_start = 0;
        };

        auto refresh_valid = [&](EnvSlot& s) {
            s.valid = s.env.valid_actions();
            s.valid_inputs.clear();
            for (const auto& a : s.valid) s.valid_inputs.push_back(build_action_input(a));
        };

        auto begin_episode = [&](EnvSlot& s) {
            s.obs = s.env.reset();
            s.map.clear();
            std::string key;
            if (variant_.needs_locate())
                key = update_map(s.env, s.map);
            s.cur_state = build_state_input(s.env, s.obs, s.map, key);
            s.steps = 0;
            s.episode_score = 0;
            s.td_sum_at_start = td_loss_sum_;
            s.inv_sum_at_start = inv_loss_sum_;
            s.loss_count_at_start = loss_count_;
            refresh_valid(s);
        };

        std::vector<EnvSlot> slots;
        slots.reserve(static_cast<std::size_t>(cfg_.num_envs));
        for (int i = 0; i < cfg_.num_envs; ++i) slots.push_back(EnvSlot{Env(game_)});
        for (auto& s : slots) begin_episode(s);

        int completed = 0;
        int max_seen = 0;
        while (completed < cfg_.total_episodes) {
            for (auto& s : slots) {
                if (completed >= cfg_.total_episodes) break;
                auto q = q_values(s.cur_state, std::span<const ActionInput<T>>(s.valid_inputs));
                const int pick = select_action(q, cfg_.tau, act_rng_);
                const std::string action = s.valid[pick];

                Transition<T> tr;
                tr.state = s.cur_state;
                tr.action = s.valid_inputs[pick];
                tr.cur_valid = s.valid_inputs;
                tr.taken_index = pick;

                StepResult r = s.env.step(action);
                s.episode_score = s.env.score();
                ++s.steps;
                tr.reward = r.reward;
                const bool truncated = s.steps >= cfg_.max_episode_steps;
                tr.done = r.done;

                std::string key;
                if (!r.done && variant_.needs_locate()) key = update_map(s.env, s.map);
                tr.next_state = build_state_input_safe(s.env, r.observation, s.map, key, r.done);
                if (!r.done) {
                    refresh_valid(s);
                    tr.next_valid = s.valid_inputs;
                }
                s.obs = r.observation;
                s.cur_state = tr.next_state;
                buffer_.push(std::move(tr));

                if (r.done || truncated) {
                    ++completed;
                    max_seen = std::max(max_seen, s.episode_score);
                    EpisodeRecord rec;
                    rec.episode = completed;
                    rec.score = s.episode_score;
                    rec.max_score = max_seen;
                    rec.steps = s.steps;
                    const long n = loss_count_ - s.loss_count_at_start;
                    rec.td_loss = n > 0 ? (td_loss_sum_ - s.td_sum_at_start) / n : 0.0;
                    rec.invdy_loss = n > 0 ? (inv_loss_sum_ - s.inv_sum_at_start) / n : 0.0;
                    log.episodes.push_back(rec);
                    if (cfg_.eval_cadence > 0 && completed % cfg_.eval_cadence == 0)
                        log.evals.push_back(eval_episode(completed));
                    if (completed < cfg_.total_episodes) begin_episode(s);
                }
            }
            if (buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
                Losses l = train_step_from_buffer();
                td_loss_sum_ += l.td;
                inv_loss_sum_ += l.invdy;
                ++loss_count_;
            }
        }
        log.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return log;
    }

    // One extra episode with a frozen policy, used for the eval cadence.
    EpisodeRecord eval_episode(int at_episode) {
        Env env(game_);
        LocationMap map;
        Observation obs = env.reset();
        std::string key;
        if (variant_.needs_locate()) key = update_map(env, map);
        StateInput<T> state = build_state_input(env, obs, map, key);
        EpisodeRecord rec;
        rec.episode = at_episode;
        for (int t = 0; t < cfg_.max_episode_steps && !env.done(); ++t) {
            auto valid = env.valid_actions();
            std::vector<ActionInput<T>> inputs;
            for (const auto& a : valid) inputs.push_back(build_action_input(a));
            auto q = q_values(state, std::span<const ActionInput<T>>(inputs));
            const int pick = select_action(q, cfg_.tau, eval_rng_, cfg_.eval_greedy);
            StepResult r = env.step(valid[pick]);
            ++rec.steps;
            if (r.done) break;
            key.clear();
            if (variant_.needs_locate()) key = update_map(env, map);
            state = build_state_input(env, r.observation, map, key);
        }
        rec.score = env.score();
        return rec;
    }

private:
    std::string update_map(Env& env, LocationMap& map) {
        LocateMode mode;
        mode.depth = cfg_.locate_depth;
        if (variant_.needs_location_map()) return update_and_get_state(env, map, mode);
        return serialize_profile(locate(env, cfg_.locate_depth));
    }

    // For terminal states locate() is illegal; fall back to an unprobed
    // profile of the observed room.
    StateInput<T> build_state_input_safe(Env& env, const Observation& obs, const LocationMap& map,
                                         const std::string& key, bool done) {
        if (!done || !variant_.needs_locate())
            return build_state_input(env, obs, map, key);
        NearbyProfile p;
        p.room_name = env.observed_room_name();
        return build_state_input(env, obs, map, serialize_profile(p));
    }

    Variant variant_;
    TrainConfig cfg_;
    GameDef game_;
    nn::Vocab vocab_;
    HashConfig hash_cfg_;
    Rng act_rng_, replay_rng_, eval_rng_;
    std::uint64_t seed_;
    int sr_dim_ = 0, ar_dim_ = 0, extra_dim_ = 0;
    nn::EncoderParams<T> params_;
    std::optional<Adam<T>> adam_;
    ReplayBuffer<T> buffer_;
    double td_loss_sum_ = 0, inv_loss_sum_ = 0;
    long loss_count_ = 0;
};

}  // namespace tgrl::rl
