#include <json.hpp>

#include "tpf/qkvl.hpp"

namespace tpf {

using ojson = nlohmann::ordered_json;

namespace {

ojson source_json(const SourceSpec& s) {
    if (s.kind == SourceSpec::Kind::Value) return s.items.at(0);
    ojson a = ojson::array();
    a.push_back(s.kind == SourceSpec::Kind::NotEqual ? "!="
                : s.kind == SourceSpec::Kind::In     ? "in"
                                                     : "not in");
    for (const auto& i : s.items) a.push_back(i);
    return a;
}

ojson dict_json(const RegisterDict& d) {
    ojson o = ojson::object();
    for (const auto& [k, v] : d) o[k] = source_json(v);
    return o;
}

ojson entries_json(const std::vector<QkvlEntry>& es, bool nested) {
    ojson arr = ojson::array();
    for (const auto& e : es) {
        ojson o = ojson::object();
        if (e.is_repeat) {
            o["layer_comment"] = e.comment;
            o["until"] = ojson::object();
            o["weights"] = entries_json(e.body, true);
        } else {
            const LayerSpec& L = e.layer;
            o["layer_comment"] = L.comment;
            // layers inside a repeat carry the flags only when set
            if (!nested || L.causal_attn) o["causal_attn"] = L.causal_attn;
            if (!nested || L.right_match) o["right_match"] = L.right_match;
            o["weights"] = {{"q", dict_json(L.q)}, {"k", dict_json(L.k)}, {"v", dict_json(L.v)}};
        }
        arr.push_back(std::move(o));
    }
    return arr;
}

[[noreturn]] void bad(const std::string& m) { throw CompileError("malformed QKVL: " + m); }

void only_keys(const ojson& o, std::initializer_list<const char*> keys) {
    if (!o.is_object()) bad("expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok |= it.key() == k;
        if (!ok) bad("unknown key '" + it.key() + "'");
    }
}

std::string str(const ojson& j, const char* what) {
    if (!j.is_string()) bad(std::string(what) + " must be a string");
    return j.get<std::string>();
}

SourceSpec source_from(const ojson& j) {
    if (j.is_string()) return SourceSpec::value(j.get<std::string>());
    if (!j.is_array() || j.size() < 2) bad("source must be a string or an operator list");
    std::string op = str(j[0], "operator");
    SourceSpec s;
    if (op == "!=") s.kind = SourceSpec::Kind::NotEqual;
    else if (op == "in") s.kind = SourceSpec::Kind::In;
    else if (op == "not in") s.kind = SourceSpec::Kind::NotIn;
    else bad("unknown operator '" + op + "'");
    for (size_t i = 1; i < j.size(); ++i) s.items.push_back(str(j[i], "source item"));
    if (s.kind == SourceSpec::Kind::NotEqual && s.items.size() != 1) bad("'!=' takes one operand");
    return s;
}

RegisterDict dict_from(const ojson& j) {
    if (!j.is_object()) bad("register dictionary must be an object");
    RegisterDict d;
    for (auto it = j.begin(); it != j.end(); ++it) d.emplace_back(it.key(), source_from(it.value()));
    return d;
}

std::vector<QkvlEntry> entries_from(const ojson& arr) {
    if (!arr.is_array()) bad("weights must be a list");
    std::vector<QkvlEntry> out;
    for (const auto& o : arr) {
        QkvlEntry e;
        if (o.is_object() && o.contains("until")) {
            only_keys(o, {"layer_comment", "until", "weights"});
            e.is_repeat = true;
            e.comment = str(o.value("layer_comment", ojson("")), "layer_comment");
            if (!o["until"].is_object() || !o["until"].empty()) bad("only NO_CHANGE ({}) is supported for until");
            e.body = entries_from(o.at("weights"));
        } else {
            only_keys(o, {"layer_comment", "causal_attn", "right_match", "weights"});
            LayerSpec& L = e.layer;
            L.comment = str(o.value("layer_comment", ojson("")), "layer_comment");
            auto flag = [&](const char* k) {
                if (!o.contains(k)) return false;
                if (!o[k].is_boolean()) bad(std::string(k) + " must be boolean");
                return o[k].get<bool>();
            };
            L.causal_attn = flag("causal_attn");
            L.right_match = flag("right_match");
            if (!o.contains("weights")) bad("layer without weights");
            const ojson& w = o["weights"];
            only_keys(w, {"q", "k", "v"});
            if (w.contains("q")) L.q = dict_from(w["q"]);
            if (w.contains("k")) L.k = dict_from(w["k"]);
            if (w.contains("v")) L.v = dict_from(w["v"]);
        }
        out.push_back(std::move(e));
    }
    return out;
}

template <class T>
std::vector<std::pair<std::string, T>> pairs_from(const ojson& j, const char* what) {
    if (!j.is_object()) bad(std::string(what) + " must be an object");
    std::vector<std::pair<std::string, T>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if constexpr (std::is_same_v<T, std::string>) {
            out.emplace_back(it.key(), str(it.value(), what));
        } else {
            if (it.value().is_null()) out.emplace_back(it.key(), std::nullopt);
            else out.emplace_back(it.key(), str(it.value(), what));
        }
    }
    return out;
}

}  // namespace

std::string serialize_qkvl(const QkvlProgram& q) {
    ojson root = ojson::object();
    ojson regs = ojson::object();
    for (const auto& [f, s] : q.registers) regs[f] = s;
    ojson consts = ojson::object();
    for (const auto& [n, v] : q.constants) consts[n] = v ? ojson(*v) : ojson(nullptr);
    ojson sys = ojson::object();
    for (const auto& [r, reg] : q.system) sys[r] = reg;
    root["register_map"] = regs;
    root["constants_map"] = consts;
    root["system_map"] = sys;
    root["watch_list"] = q.watch;
    root["weights"] = entries_json(q.entries, false);
    return root.dump(4) + "\n";
}

QkvlProgram deserialize_qkvl(const std::string& text) {
    ojson root;
    try {
        root = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        bad(e.what());
    }
    only_keys(root, {"register_map", "constants_map", "system_map", "watch_list", "weights"});
    QkvlProgram q;
    if (root.contains("register_map")) q.registers = pairs_from<std::string>(root["register_map"], "register_map");
    if (root.contains("constants_map"))
        q.constants = pairs_from<std::optional<std::string>>(root["constants_map"], "constants_map");
    if (root.contains("system_map")) q.system = pairs_from<std::string>(root["system_map"], "system_map");
    if (root.contains("watch_list")) {
        if (!root["watch_list"].is_array()) bad("watch_list must be a list");
        for (const auto& w : root["watch_list"]) q.watch.push_back(str(w, "watch_list entry"));
    }
    if (root.contains("weights")) q.entries = entries_from(root["weights"]);
    return q;
}

}  // namespace tpf
