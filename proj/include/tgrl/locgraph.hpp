#pragma once
// Approximate state hash built from the location graph: identify the current
// location by depth-limited exploration (po1) and remember the most recent
// look text per identified location (po2).

#include <tgrl/engine.hpp>
#include <tgrl/hashing.hpp>

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tgrl {

struct NearbyProfile;
using NeighborDesc = std::variant<std::string, std::unique_ptr<NearbyProfile>>;

struct NearbyProfile {
    std::string room_name;
    // (direction, neighbor) pairs, sorted by direction; only directions whose
    // step changed the world are present.
    std::vector<std::pair<std::string, NeighborDesc>> nearby;
};

namespace detail {

inline std::string escape_meta(const std::string& s) {
    static const std::string meta = "\\()|,:{}=;";
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (meta.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

inline std::string unescape_meta(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        out.push_back(s[i]);
    }
    return out;
}

}  // namespace detail

inline std::string serialize_profile(const NearbyProfile& p) {
    std::string out = "(" + detail::escape_meta(p.room_name) + "|";
    bool first = true;
    for (const auto& [dir, desc] : p.nearby) {
        if (!first) out += ",";
        out += dir + ":";
        if (std::holds_alternative<std::string>(desc))
            out += detail::escape_meta(std::get<std::string>(desc));
        else
            out += serialize_profile(*std::get<std::unique_ptr<NearbyProfile>>(desc));
        first = false;
    }
    out += ")";
    return out;
}

// Depth-limited probe of every canonical direction. Directions that change
// the world are recorded with the neighbor's observed room name (or a nested
// profile when depth > 1); everything is rolled back via snapshot/restore, so
// the environment is left bit-identical.
inline NearbyProfile locate(Env& env, int depth) {
    if (env.done()) throw std::logic_error("locate() called on a finished episode");
    NearbyProfile p;
    p.room_name = env.observed_room_name();
    const Snapshot snap = env.snapshot();
    for (const auto& dir : directions()) {
        const StepResult r = env.step(dir);
        if (r.world_changed) {
            if (depth > 1 && !env.done()) {
                auto sub = std::make_unique<NearbyProfile>(locate(env, depth - 1));
                p.nearby.emplace_back(dir, NeighborDesc(std::move(sub)));
            } else {
                p.nearby.emplace_back(dir, NeighborDesc(env.observed_room_name()));
            }
        }
        env.restore(snap);
    }
    std::sort(p.nearby.begin(), p.nearby.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return p;
}

using LocationKey = std::string;

// Last-look memory. Entries are added or overwritten, never removed, within
// an episode; serialization is canonical (sorted keys) regardless of the
// order locations were first seen.
class LocationMap {
public:
    void put(const LocationKey& key, const std::string& look) {
        for (auto& [k, v] : entries_) {
            if (k == key) {
                v = look;
                return;
            }
        }
        entries_.emplace_back(key, look);
    }

    const std::string* find(const LocationKey& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return &v;
        return nullptr;
    }

    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }
    const std::vector<std::pair<LocationKey, std::string>>& entries() const { return entries_; }

    bool operator==(const LocationMap& other) const {
        auto a = entries_, b = other.entries_;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        return a == b;
    }

private:
    std::vector<std::pair<LocationKey, std::string>> entries_;
};

inline std::string serialize_map(const LocationMap& m) {
    auto entries = m.entries();
    std::sort(entries.begin(), entries.end());
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : entries) {
        if (!first) out += ";";
        out += detail::escape_meta(k) + "=" + detail::escape_meta(v);
        first = false;
    }
    out += "}";
    return out;
}

inline LocationMap parse_map(const std::string& s) {
    if (s.size() < 2 || s.front() != '{' || s.back() != '}')
        throw std::invalid_argument("malformed location map serialization");
    LocationMap m;
    std::string key, cur;
    bool in_key = true;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 2 < s.size()) {
            cur.push_back(s[++i]);
        } else if (c == '=' && in_key) {
            key = cur;
            cur.clear();
            in_key = false;
        } else if (c == ';' && !in_key) {
            m.put(key, cur);
            cur.clear();
            in_key = true;
        } else {
            cur.push_back(c);
        }
    }
    if (!in_key) m.put(key, cur);
    return m;
}

struct LocateMode {
    bool use_gt_room = false;
    int depth = 1;
};

// One step of the state-approximation bookkeeping: key the current location
// (by exploration profile or, in the oracle mode, by ground-truth room id)
// and record its current look text.
inline LocationKey update_and_get_state(Env& env, LocationMap& map, const LocateMode& mode) {
    LocationKey key = mode.use_gt_room ? LocationKey("room:" + env.gt_room_id())
                                       : serialize_profile(locate(env, mode.depth));
    map.put(key, env.look_text());
    return key;
}

struct ApproxState {
    HashVector po1_vec;
    HashVector po2_vec;
};

inline ApproxState approx_state(Env& env, const LocationMap& map, const HashConfig& cfg,
                                int depth = 1) {
    ApproxState s;
    s.po1_vec = hash_vec(serialize_profile(locate(env, depth)), cfg);
    s.po2_vec = hash_vec(serialize_map(map), cfg);
    return s;
}

}  // namespace tgrl
