#pragma once
// Deterministic text-adventure POMDP engine with handicap access (ground
// truth state hash, room id, valid actions, snapshot/restore). One Env is
// single-threaded; distinct Envs are independent.

#include <tgrl/game.hpp>
#include <tgrl/hashing.hpp>

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgrl {

struct Observation {
    std::string response;        // o_t
    std::string inventory_text;  // i_t
    std::string look_text;       // l_t
};

struct StepResult {
    Observation observation;
    int reward = 0;
    bool done = false;
    bool world_changed = false;
};

struct WorldState {
    std::string player_room;
    std::map<std::string, std::string> object_locations;  // object id -> room|"inventory"|object id
    std::map<std::string, bool> object_states;            // switchable objects, on/off
    std::set<std::string> flags;
    std::set<std::string> fired_triggers;
    int score = 0;
    bool done = false;
};

struct Snapshot {
    WorldState state;
    std::uint64_t game_tag = 0;
};

// Fixed engine strings. These are part of the observable surface and are
// never reworded without updating the golden tests.
namespace msg {
inline constexpr const char* kDarknessLook = "It is pitch black.";
inline constexpr const char* kDarknessName = "Darkness";
inline constexpr const char* kEmptyHanded = "You are carrying nothing.";
inline constexpr const char* kNothingHappens = "nothing happens";
inline constexpr const char* kCantGoThatWay = "You can't go that way.";
inline constexpr const char* kDeathInDark =
    "You stumble in the darkness and are devoured by something unseen.";
inline constexpr const char* kTaken = "Taken.";
inline constexpr const char* kDropped = "Dropped.";
inline constexpr const char* kNotCarried = "You aren't carrying that.";
inline constexpr const char* kNotHere = "You don't see any such thing.";
inline constexpr const char* kNotPortable = "You can't take that.";
inline constexpr const char* kNotSwitchable = "You can't switch that.";
inline constexpr const char* kTooDark = "It is too dark to see.";
inline constexpr const char* kDone = "Done.";
inline constexpr const char* kProvidingLight = " (providing light)";
}  // namespace msg

class Env {
public:
    explicit Env(GameDef def) : def_(std::move(def)), game_tag_(tag_of(def_)) { reset(); }

    const GameDef& def() const { return def_; }

    Observation reset() {
        ws_ = WorldState{};
        ws_.player_room = def_.start_room;
        for (const auto& o : def_.objects) {
            ws_.object_locations[o.id] = o.initial_location;
            if (o.switchable) ws_.object_states[o.id] = false;
        }
        Observation obs;
        obs.response = look_text();
        obs.inventory_text = inventory_text();
        obs.look_text = obs.response;
        return obs;
    }

    StepResult step(const std::string& action) {
        if (ws_.done) throw std::logic_error("step() called on a finished episode");
        const std::string cmd = detail::normalize_action(action);
        const std::string pre = serialize_state();

        int reward = 0;
        bool killed = false;
        std::string response = apply(cmd, reward, killed);

        if (killed) {
            // Dying ends the episode and pays nothing that step.
            reward = 0;
            ws_.done = true;
        } else {
            ws_.score += reward;
        }

        StepResult r;
        r.reward = reward;
        r.done = ws_.done;
        r.world_changed = serialize_state() != pre;
        r.observation.response = std::move(response);
        r.observation.inventory_text = inventory_text();
        r.observation.look_text = look_text();
        return r;
    }

    // Exactly the actions whose step would change the world, plus "look" and
    // "inventory"; sorted. Implemented by probing candidate actions against a
    // snapshot, which keeps it in lockstep with step() semantics.
    std::vector<std::string> valid_actions() {
        if (ws_.done) throw std::logic_error("valid_actions() called on a finished episode");
        std::set<std::string> candidates;
        for (const auto& d : directions()) candidates.insert(d);
        for (const auto& t : def_.triggers) candidates.insert(t.verb_phrase);
        for (const auto& o : def_.objects) {
            candidates.insert("take " + o.name);
            candidates.insert("drop " + o.name);
            if (o.switchable) {
                candidates.insert("turn on " + o.name);
                candidates.insert("turn off " + o.name);
            }
        }
        candidates.erase("look");
        candidates.erase("inventory");

        std::vector<std::string> out;
        const Snapshot snap = snapshot();
        for (const auto& c : candidates) {
            if (step(c).world_changed) out.push_back(c);
            restore(snap);
        }
        out.push_back("inventory");
        out.push_back("look");
        std::sort(out.begin(), out.end());
        return out;
    }

    std::uint64_t gt_state_hash() const { return str_hash(serialize_state()); }

    const std::string& gt_room_id() const { return ws_.player_room; }

    Snapshot snapshot() const { return Snapshot{ws_, game_tag_}; }

    void restore(const Snapshot& snap) {
        if (snap.game_tag != game_tag_)
            throw std::logic_error("snapshot belongs to a different game");
        ws_ = snap.state;
    }

    bool done() const { return ws_.done; }
    int score() const { return ws_.score; }
    const WorldState& world_state() const { return ws_; }

    // Room name as the player perceives it; "Darkness" when unlit.
    std::string observed_room_name() const {
        return in_darkness() ? msg::kDarknessName : current_room().name;
    }

    bool in_darkness() const { return current_room().dark && !room_is_lit(); }

    std::string look_text() const {
        if (in_darkness()) return msg::kDarknessLook;
        const RoomDef& r = current_room();
        std::string out = r.name + "\n" + r.desc;
        for (const auto& o : def_.objects) {
            if (ws_.object_locations.at(o.id) != r.id) continue;
            out += "\nThere is a " + o.name + " here";
            if (is_lit(o)) out += msg::kProvidingLight;
            out += ".";
        }
        return out;
    }

    std::string inventory_text() const {
        std::string items;
        for (const auto& o : def_.objects) {
            if (ws_.object_locations.at(o.id) != "inventory") continue;
            if (!items.empty()) items += ", ";
            items += "a " + o.name;
            if (is_lit(o)) items += msg::kProvidingLight;
        }
        if (items.empty()) return msg::kEmptyHanded;
        return "You are carrying: " + items + ".";
    }

    // Canonical state serialization: sorted keys, fixed delimiters. Distinct
    // states serialize distinctly; gt_state_hash and world_changed both hang
    // off this string.
    std::string serialize_state() const {
        std::ostringstream ss;
        ss << "room=" << ws_.player_room << ";objs=";
        bool first = true;
        for (const auto& [id, loc] : ws_.object_locations) {
            if (!first) ss << ",";
            ss << id << "@" << loc;
            first = false;
        }
        ss << ";on=";
        first = true;
        for (const auto& [id, on] : ws_.object_states) {
            if (!first) ss << ",";
            ss << id << ":" << (on ? 1 : 0);
            first = false;
        }
        ss << ";flags=";
        first = true;
        for (const auto& f : ws_.flags) {
            if (!first) ss << ",";
            ss << f;
            first = false;
        }
        ss << ";fired=";
        first = true;
        for (const auto& t : ws_.fired_triggers) {
            if (!first) ss << ",";
            ss << t;
            first = false;
        }
        ss << ";score=" << ws_.score << ";done=" << (ws_.done ? 1 : 0);
        return ss.str();
    }

    // Exits currently usable from a room: declared ones plus any revealed by
    // triggers that have fired.
    std::map<std::string, std::string> current_exits(const std::string& room_id) const {
        std::map<std::string, std::string> exits = def_.room(room_id).exits;
        for (const auto& t : def_.triggers) {
            if (!ws_.fired_triggers.count(t.id)) continue;
            for (const auto& e : t.effects)
                if (e.kind == EffectKind::RevealExit && e.a == room_id) exits[e.b] = e.c;
        }
        return exits;
    }

private:
    static std::uint64_t tag_of(const GameDef& def) {
        std::string blob = def.name + "|" + def.start_room;
        for (const auto& r : def.rooms) blob += "|" + r.id;
        for (const auto& o : def.objects) blob += "|" + o.id;
        for (const auto& t : def.triggers) blob += "|" + t.id;
        return str_hash(blob);
    }

    const RoomDef& current_room() const { return def_.room(ws_.player_room); }

    bool is_lit(const ObjectDef& o) const {
        return o.light_source && o.switchable && ws_.object_states.at(o.id);
    }

    bool room_is_lit() const {
        for (const auto& o : def_.objects) {
            if (!is_lit(o)) continue;
            const std::string& loc = ws_.object_locations.at(o.id);
            if (loc == "inventory" || loc == ws_.player_room) return true;
        }
        return false;
    }

    bool condition_met(const Condition& c) const {
        switch (c.kind) {
            case CondKind::Flag:
                return (ws_.flags.count(c.subject) > 0) == c.value;
            case CondKind::InInventory:
                return (ws_.object_locations.at(c.subject) == "inventory") == c.value;
            case CondKind::ObjectState:
                return ws_.object_states.count(c.subject) &&
                       ws_.object_states.at(c.subject) == c.value;
        }
        return false;
    }

    const ObjectDef* visible_object_here(const std::string& name) const {
        const ObjectDef* o = def_.object_by_name(name);
        if (!o) return nullptr;
        if (ws_.object_locations.at(o->id) != ws_.player_room) return nullptr;
        return o;
    }

    std::string apply(const std::string& cmd, int& reward, bool& killed) {
        // Navigation owns the ten direction words.
        if (is_direction(cmd)) {
            if (in_darkness()) {
                killed = true;
                return msg::kDeathInDark;
            }
            auto exits = current_exits(ws_.player_room);
            auto it = exits.find(cmd);
            if (it == exits.end()) return msg::kCantGoThatWay;
            ws_.player_room = it->second;
            return look_text();
        }

        // Triggers take precedence over built-in verbs so games can attach
        // rewards to phrases like "take lantern".
        bool fired_any = false;
        std::string trigger_response;
        if (!in_darkness()) {
            for (const auto& t : def_.triggers) {
                if (t.verb_phrase != cmd) continue;
                if (t.room != "any" && t.room != ws_.player_room) continue;
                if (t.once && ws_.fired_triggers.count(t.id)) continue;
                bool ok = true;
                for (const auto& c : t.requires_)
                    if (!condition_met(c)) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;

                fired_any = true;
                ws_.fired_triggers.insert(t.id);
                int fired_points = 0;
                for (const auto& e : t.effects) {
                    switch (e.kind) {
                        case EffectKind::SetFlag:
                            ws_.flags.insert(e.a);
                            break;
                        case EffectKind::MovePlayer:
                            ws_.player_room = e.a;
                            break;
                        case EffectKind::RevealExit:
                            break;  // carried by fired_triggers, see current_exits()
                        case EffectKind::MoveObject:
                            ws_.object_locations[e.a] = e.b;
                            break;
                        case EffectKind::Reward:
                            fired_points += e.points;
                            break;
                        case EffectKind::EndEpisode:
                            ws_.done = true;
                            break;
                        case EffectKind::KillPlayer:
                            killed = true;
                            break;
                    }
                }
                reward += fired_points;
                trigger_response = msg::kDone;
                if (killed) trigger_response = "You have died.";
                else if (fired_points > 0)
                    trigger_response += "\n[Your score has gone up by " +
                                        std::to_string(fired_points) + " points.]";
            }
        }
        if (fired_any) return trigger_response;

        if (cmd == "look") return look_text();
        if (cmd == "inventory") return inventory_text();

        if (cmd.rfind("take ", 0) == 0) {
            const std::string name = cmd.substr(5);
            const ObjectDef* any = def_.object_by_name(name);
            if (!any) return msg::kNothingHappens;
            if (in_darkness()) return msg::kTooDark;
            const ObjectDef* o = visible_object_here(name);
            if (!o) return msg::kNotHere;
            if (!o->portable) return msg::kNotPortable;
            ws_.object_locations[o->id] = "inventory";
            return msg::kTaken;
        }
        if (cmd.rfind("drop ", 0) == 0) {
            const std::string name = cmd.substr(5);
            const ObjectDef* o = def_.object_by_name(name);
            if (!o) return msg::kNothingHappens;
            if (ws_.object_locations.at(o->id) != "inventory") return msg::kNotCarried;
            ws_.object_locations[o->id] = ws_.player_room;
            return msg::kDropped;
        }
        for (const bool turning_on : {true, false}) {
            const std::string prefix = turning_on ? "turn on " : "turn off ";
            if (cmd.rfind(prefix, 0) != 0) continue;
            const std::string name = cmd.substr(prefix.size());
            const ObjectDef* o = def_.object_by_name(name);
            if (!o) return msg::kNothingHappens;
            if (!o->switchable) return msg::kNotSwitchable;
            if (ws_.object_locations.at(o->id) != "inventory") return msg::kNotCarried;
            if (ws_.object_states.at(o->id) == turning_on)
                return turning_on ? "It is already on." : "It is already off.";
            ws_.object_states[o->id] = turning_on;
            return "The " + o->name + " is now " + (turning_on ? "on." : "off.");
        }

        return msg::kNothingHappens;
    }

    GameDef def_;
    std::uint64_t game_tag_;
    WorldState ws_;
};

// Every fixed string the engine can emit plus all game-authored text; the
// vocabulary is built from tokens of these, so no runtime observation can
// contain an out-of-vocabulary word.
inline std::vector<std::string> text_corpus(const GameDef& def) {
    std::vector<std::string> out;
    for (const auto& d : directions()) out.push_back(d);
    out.insert(out.end(),
               {msg::kDarknessLook, msg::kDarknessName, msg::kEmptyHanded, msg::kNothingHappens,
                msg::kCantGoThatWay, msg::kDeathInDark, msg::kTaken, msg::kDropped,
                msg::kNotCarried, msg::kNotHere, msg::kNotPortable, msg::kNotSwitchable,
                msg::kTooDark, msg::kDone, msg::kProvidingLight, "You have died.",
                "It is already on.", "It is already off.", "is now on.", "is now off.",
                "There is a here.", "You are carrying:", "take", "drop", "turn on", "turn off",
                "look", "inventory", "[Your score has gone up by points.]", "The"});
    out.push_back(def.name);
    for (const auto& r : def.rooms) {
        out.push_back(r.name);
        out.push_back(r.desc);
    }
    for (const auto& o : def.objects) out.push_back(o.name);
    for (const auto& t : def.triggers) {
        out.push_back(t.verb_phrase);
        for (const auto& e : t.effects)
            if (e.kind == EffectKind::Reward) out.push_back(std::to_string(e.points));
    }
    return out;
}

}  // namespace tgrl
