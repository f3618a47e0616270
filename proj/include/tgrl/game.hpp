#pragma once
// Declarative game definitions and their loader. A .game file is a JSON
// document with top-level keys meta {name, max_score, start_room}, rooms[],
// objects[] and triggers[].

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgrl {

// Canonical direction set. Order here is the canonical iteration order.
inline const std::array<std::string, 10>& directions() {
    static const std::array<std::string, 10> dirs = {
        "north", "south", "east", "west", "northeast",
        "northwest", "southeast", "southwest", "up", "down"};
    return dirs;
}

inline bool is_direction(const std::string& word) {
    const auto& d = directions();
    return std::find(d.begin(), d.end(), word) != d.end();
}

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RoomDef {
    std::string id;
    std::string name;
    std::string desc;
    std::map<std::string, std::string> exits;  // direction -> room id
    bool dark = false;
};

struct ObjectDef {
    std::string id;
    std::string name;
    std::string initial_location;  // room id | "inventory" | object id
    bool portable = false;
    bool light_source = false;
    bool switchable = false;
};

enum class CondKind { Flag, InInventory, ObjectState };

struct Condition {
    CondKind kind = CondKind::Flag;
    std::string subject;  // flag name or object id
    bool value = true;    // required truth value (set / carried / switched on)
};

enum class EffectKind {
    SetFlag,
    MovePlayer,
    RevealExit,
    MoveObject,
    Reward,
    EndEpisode,
    KillPlayer,
};

struct Effect {
    EffectKind kind = EffectKind::SetFlag;
    std::string a;  // flag | room | object id, per kind
    std::string b;  // direction (reveal_exit) or destination (move_object)
    std::string c;  // target room (reveal_exit)
    int points = 0;
};

struct TriggerDef {
    std::string id;
    std::string verb_phrase;  // full normalized action text, e.g. "push rug"
    std::string room;         // room id or "any"
    std::vector<Condition> requires_;
    std::vector<Effect> effects;  // applied in declared order
    bool once = true;
};

struct GameDef {
    std::string name;
    int max_score = 0;
    std::string start_room;
    std::vector<RoomDef> rooms;
    std::vector<ObjectDef> objects;
    std::vector<TriggerDef> triggers;

    const RoomDef& room(const std::string& id) const {
        for (const auto& r : rooms)
            if (r.id == id) return r;
        throw ValidationError("unknown room id: " + id);
    }
    const ObjectDef* object(const std::string& id) const {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }
    const ObjectDef* object_by_name(const std::string& name) const {
        for (const auto& o : objects)
            if (o.name == name) return &o;
        return nullptr;
    }
};

namespace detail {

inline std::string normalize_action(std::string s) {
    std::string out;
    out.reserve(s.size());
    bool last_space = true;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!last_space) out.push_back(' ');
            last_space = true;
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
            last_space = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline bool valid_id(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::islower(static_cast<unsigned char>(c)) ||
              std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
            return false;
    return true;
}

// nlohmann reports byte offsets; turn them into line/column for loader errors.
inline std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline Condition parse_condition(const nlohmann::json& j) {
    Condition c;
    const std::string type = j.at("type").get<std::string>();
    if (type == "flag") {
        c.kind = CondKind::Flag;
        c.subject = j.at("flag").get<std::string>();
    } else if (type == "in_inventory") {
        c.kind = CondKind::InInventory;
        c.subject = j.at("object").get<std::string>();
    } else if (type == "object_state") {
        c.kind = CondKind::ObjectState;
        c.subject = j.at("object").get<std::string>();
    } else {
        throw ValidationError("unknown condition type: " + type);
    }
    c.value = j.value("value", true);
    return c;
}

inline Effect parse_effect(const nlohmann::json& j) {
    Effect e;
    const std::string type = j.at("type").get<std::string>();
    if (type == "set_flag") {
        e.kind = EffectKind::SetFlag;
        e.a = j.at("flag").get<std::string>();
    } else if (type == "move_player") {
        e.kind = EffectKind::MovePlayer;
        e.a = j.at("room").get<std::string>();
    } else if (type == "reveal_exit") {
        e.kind = EffectKind::RevealExit;
        e.a = j.at("room").get<std::string>();
        e.b = j.at("direction").get<std::string>();
        e.c = j.at("target").get<std::string>();
    } else if (type == "move_object") {
        e.kind = EffectKind::MoveObject;
        e.a = j.at("object").get<std::string>();
        e.b = j.at("to").get<std::string>();
    } else if (type == "reward") {
        e.kind = EffectKind::Reward;
        e.points = j.at("points").get<int>();
    } else if (type == "end_episode") {
        e.kind = EffectKind::EndEpisode;
    } else if (type == "kill_player") {
        e.kind = EffectKind::KillPlayer;
    } else {
        throw ValidationError("unknown effect type: " + type);
    }
    return e;
}

}  // namespace detail

inline void validate_game(const GameDef& g) {
    std::set<std::string> room_ids;
    for (const auto& r : g.rooms) {
        if (!detail::valid_id(r.id))
            throw ValidationError("bad room id (want [a-z0-9_]+): '" + r.id + "'");
        if (!room_ids.insert(r.id).second)
            throw ValidationError("duplicate room id: " + r.id);
    }
    if (g.rooms.empty()) throw ValidationError("game declares no rooms");
    if (!room_ids.count(g.start_room))
        throw ValidationError("start_room '" + g.start_room + "' is not a declared room");

    for (const auto& r : g.rooms) {
        for (const auto& [dir, target] : r.exits) {
            if (!is_direction(dir))
                throw ValidationError("room '" + r.id + "' uses unknown direction '" + dir + "'");
            if (!room_ids.count(target))
                throw ValidationError("room '" + r.id + "' exit '" + dir +
                                      "' targets undeclared room '" + target + "'");
        }
    }

    std::set<std::string> object_ids, object_names;
    for (const auto& o : g.objects) {
        if (!detail::valid_id(o.id))
            throw ValidationError("bad object id: '" + o.id + "'");
        if (!object_ids.insert(o.id).second)
            throw ValidationError("duplicate object id: " + o.id);
        // Names are globally unique so "take <name>" stays unambiguous no
        // matter where objects end up at runtime.
        if (!object_names.insert(o.name).second)
            throw ValidationError("duplicate object name: " + o.name);
    }
    for (const auto& o : g.objects) {
        const bool in_room = room_ids.count(o.initial_location) > 0;
        const bool in_inv = o.initial_location == "inventory";
        const bool in_obj = object_ids.count(o.initial_location) > 0 && o.initial_location != o.id;
        if (!(in_room || in_inv || in_obj))
            throw ValidationError("object '" + o.id + "' has invalid initial_location '" +
                                  o.initial_location + "'");
    }

    std::set<std::string> trigger_ids;
    for (const auto& t : g.triggers) {
        if (!detail::valid_id(t.id))
            throw ValidationError("bad trigger id: '" + t.id + "'");
        if (!trigger_ids.insert(t.id).second)
            throw ValidationError("duplicate trigger id: " + t.id);
        if (t.verb_phrase != detail::normalize_action(t.verb_phrase))
            throw ValidationError("trigger '" + t.id + "' verb phrase is not normalized");
        if (t.verb_phrase.empty())
            throw ValidationError("trigger '" + t.id + "' has empty verb phrase");
        if (is_direction(t.verb_phrase))
            throw ValidationError("trigger '" + t.id + "' verb phrase is a reserved direction");
        if (t.room != "any" && !room_ids.count(t.room))
            throw ValidationError("trigger '" + t.id + "' names undeclared room '" + t.room + "'");
        int reward = 0;
        for (const auto& e : t.effects) {
            switch (e.kind) {
                case EffectKind::SetFlag:
                    break;
                case EffectKind::MovePlayer:
                    if (!room_ids.count(e.a))
                        throw ValidationError("trigger '" + t.id + "' moves player to undeclared room");
                    break;
                case EffectKind::RevealExit:
                    if (!room_ids.count(e.a) || !room_ids.count(e.c))
                        throw ValidationError("trigger '" + t.id + "' reveal_exit names undeclared room");
                    if (!is_direction(e.b))
                        throw ValidationError("trigger '" + t.id + "' reveal_exit bad direction");
                    break;
                case EffectKind::MoveObject:
                    if (!object_ids.count(e.a))
                        throw ValidationError("trigger '" + t.id + "' moves undeclared object");
                    if (!(room_ids.count(e.b) || e.b == "inventory" || object_ids.count(e.b)))
                        throw ValidationError("trigger '" + t.id + "' moves object to invalid location");
                    break;
                case EffectKind::Reward:
                    if (e.points < 0)
                        throw ValidationError("trigger '" + t.id + "' has negative reward");
                    reward += e.points;
                    break;
                case EffectKind::EndEpisode:
                case EffectKind::KillPlayer:
                    break;
            }
        }
        for (const auto& c : t.requires_) {
            if (c.kind == CondKind::Flag) continue;
            if (!object_ids.count(c.subject))
                throw ValidationError("trigger '" + t.id + "' condition names undeclared object");
        }
        // Score stays bounded: repeatable triggers may not pay out.
        if (reward > 0 && !t.once)
            throw ValidationError("trigger '" + t.id + "' is repeatable but carries a reward");
        if (reward > g.max_score)
            throw ValidationError("trigger '" + t.id + "' reward exceeds declared max_score");
    }
    if (g.max_score < 0) throw ValidationError("max_score must be non-negative");
}

inline GameDef load_game_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = detail::line_col(text, e.byte);
        std::ostringstream msg;
        msg << "parse error at line " << line << ", column " << col << ": " << e.what();
        throw ParseError(msg.str());
    }

    GameDef g;
    try {
        const auto& meta = j.at("meta");
        g.name = meta.at("name").get<std::string>();
        g.max_score = meta.at("max_score").get<int>();
        g.start_room = meta.at("start_room").get<std::string>();

        for (const auto& jr : j.at("rooms")) {
            RoomDef r;
            r.id = jr.at("id").get<std::string>();
            r.name = jr.at("name").get<std::string>();
            r.desc = jr.at("desc").get<std::string>();
            r.dark = jr.value("dark", false);
            if (jr.contains("exits"))
                for (const auto& [dir, target] : jr.at("exits").items())
                    r.exits[dir] = target.get<std::string>();
            g.rooms.push_back(std::move(r));
        }
        if (j.contains("objects"))
            for (const auto& jo : j.at("objects")) {
                ObjectDef o;
                o.id = jo.at("id").get<std::string>();
                o.name = jo.at("name").get<std::string>();
                o.initial_location = jo.at("initial_location").get<std::string>();
                o.portable = jo.value("portable", false);
                o.light_source = jo.value("light_source", false);
                o.switchable = jo.value("switchable", false);
                g.objects.push_back(std::move(o));
            }
        if (j.contains("triggers"))
            for (const auto& jt : j.at("triggers")) {
                TriggerDef t;
                t.id = jt.at("id").get<std::string>();
                t.verb_phrase = jt.at("verb_phrase").get<std::string>();
                t.room = jt.value("room", std::string("any"));
                t.once = jt.value("once", true);
                if (jt.contains("requires"))
                    for (const auto& jc : jt.at("requires")) t.requires_.push_back(detail::parse_condition(jc));
                for (const auto& je : jt.at("effects")) t.effects.push_back(detail::parse_effect(je));
                g.triggers.push_back(std::move(t));
            }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed game document: ") + e.what());
    }

    validate_game(g);
    return g;
}

inline GameDef load_game(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open game file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_game_text(ss.str());
}

}  // namespace tgrl
