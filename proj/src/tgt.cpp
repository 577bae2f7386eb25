#include "tpf/tgt.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tpf::tgt {

using ojson = nlohmann::ordered_json;

int TemplateSpec::q_count() const {
    return static_cast<int>(std::count_if(q_fields.begin(), q_fields.end(), [](const Field& f) { return !f.delimiter; }));
}
int TemplateSpec::a_count() const {
    return static_cast<int>(std::count_if(a_fields.begin(), a_fields.end(), [](const Field& f) { return !f.delimiter; }));
}

TaskSpec parse_task(const std::string& name) {
    TaskSpec t;
    t.name = name;
    auto us = name.find("_shot_");
    if (us == std::string::npos) throw TgtError("unknown task '" + name + "'");
    try {
        t.n_shot = std::stoi(name.substr(0, us));
    } catch (const std::exception&) {
        throw TgtError("unknown task '" + name + "'");
    }
    std::string rest = name.substr(us + 6);
    if (rest == "rlw" || rest == "rlw_10x") t.mode = SymbolMode::Rlw;
    else if (rest == "eng") t.mode = SymbolMode::Eng;
    else throw TgtError("unknown task '" + name + "'");
    if (t.n_shot < 1 || t.n_shot > 10) throw TgtError("unsupported shot count in '" + name + "'");
    return t;
}

const std::vector<std::string>& split_names() {
    static const std::vector<std::string> names = {
        "train", "dev", "test", "ood_lexical", "ood_cons_len_3", "ood_cons_len_5", "ood_cons_len_7",
        "ood_cons_len_10", "ood_cons_count_3", "ood_cons_count_5", "ood_cons_count_7", "ood_cons_count_10"};
    return names;
}

SplitSpec parse_split(const std::string& name) {
    if (std::find(split_names().begin(), split_names().end(), name) == split_names().end())
        throw TgtError("unknown split '" + name + "'");
    SplitSpec s;
    s.name = name;
    if (name == "train") s.echo = true;
    if (name == "ood_lexical") s.lexical = true;
    if (name.rfind("ood_cons_len_", 0) == 0) s.lens = {std::stoi(name.substr(13))};
    if (name.rfind("ood_cons_count_", 0) == 0) s.counts = {std::stoi(name.substr(15))};
    return s;
}

const std::vector<std::string>& delimiter_pool() {
    static const std::vector<std::string> pool = [] {
        std::vector<std::string> p;
        for (char c = 33; c < 127; ++c) {
            bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
            if (!alnum && c != '.') p.emplace_back(1, c);
        }
        return p;
    }();
    return pool;
}

namespace {

const std::vector<std::string>& words() {
    static const std::vector<std::string> w = {
        "the", "big", "bear", "red", "car", "some", "baby", "cub", "one", "small", "house", "his", "green", "bird",
        "light", "monkey", "john", "mary", "sue", "bill", "loves", "hugs", "dog", "cat", "tree", "river", "stone",
        "cloud", "rain", "sun", "moon", "star", "road", "city", "town", "field", "apple", "pear", "plum", "grape",
        "blue", "black", "white", "brown", "tall", "short", "old", "new", "fast", "slow", "warm", "cold", "soft",
        "hard", "bright", "dark", "happy", "sad", "quiet", "loud", "boat", "ship", "train", "plane", "horse", "cow",
        "goat", "sheep", "lion", "tiger", "wolf", "fox", "owl", "hawk", "fish", "frog", "snake", "mouse", "book",
        "pen", "desk", "chair", "table", "door", "window", "wall", "roof", "floor", "lamp", "clock", "bell", "key",
        "box", "cup", "plate", "spoon", "knife", "fork", "bread", "milk", "cheese", "salt", "sugar", "tea", "coffee",
        "water", "fire", "wind", "snow", "ice", "sand", "rock", "hill", "lake", "sea", "island", "forest", "garden",
        "flower", "leaf", "root", "seed", "grass", "farm", "market", "school", "church", "bridge", "tower", "castle",
        "king", "queen", "child", "friend", "doctor", "farmer", "painter", "singer", "writer", "teacher", "runs",
        "sees", "finds", "takes", "gives", "makes", "holds", "reads", "sings", "paints", "builds", "opens", "closes",
        "carries", "follows", "meets", "calls", "helps", "watches", "likes", "wants", "needs", "brings", "sends",
        "shows", "tells", "asks", "answers", "keeps", "leaves", "under", "over", "near", "behind", "across", "with",
        "without", "into", "onto", "from", "toward", "around", "between", "beyond", "inside", "outside", "early",
        "late", "often", "never", "always", "again", "very", "quite", "rather", "almost"};
    return w;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

int below(Rng& rng, int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[below(rng, static_cast<int>(v.size()))];
}

std::string draw_symbol(Rng& rng, SymbolMode mode, std::set<std::string>& used) {
    for (int tries = 0; tries < 10000; ++tries) {
        std::string s;
        if (mode == SymbolMode::Eng) {
            s = pick(rng, words());
        } else {
            char base = mode == SymbolMode::RlwUpper ? 'A' : 'a';
            s = {static_cast<char>(base + below(rng, 26)), static_cast<char>(base + below(rng, 26))};
        }
        if (used.insert(s).second) return s;
    }
    throw TgtError("constituent symbol pool exhausted");
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    for (std::string t; ss >> t;) out.push_back(t);
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& t : v) {
        if (!s.empty()) s += ' ';
        s += t;
    }
    return s;
}

}  // namespace

TemplateSpec sample_template(Rng& rng, int cons_count) {
    if (cons_count < 1) throw TgtError("cons_count must be at least 1");
    TemplateSpec t;
    // question: c0 d c1 d ... c_{n-1} [d]
    for (int i = 0; i < cons_count; ++i) {
        if (i > 0) t.q_fields.push_back({true, -1, {}});
        t.q_fields.push_back({false, i, {}});
    }
    if (below(rng, 2)) t.q_fields.push_back({true, -1, {}});

    std::vector<int> slots(cons_count);
    for (int i = 0; i < cons_count; ++i) slots[i] = i;
    std::shuffle(slots.begin(), slots.end(), rng);
    int a = 1 + below(rng, cons_count);
    for (int i = 0; i < a; ++i) {
        if (i > 0) t.a_fields.push_back({true, -1, {}});
        t.a_fields.push_back({false, slots[i], {}});
    }
    if (below(rng, 2)) t.a_fields.push_back({true, -1, {}});

    // answer delimiters either reuse a (distinct) question delimiter or are fresh
    std::vector<Field*> qd, fresh;
    for (auto& f : t.q_fields)
        if (f.delimiter) qd.push_back(&f);
    std::vector<int> free_q(qd.size());
    for (size_t i = 0; i < qd.size(); ++i) free_q[i] = static_cast<int>(i);
    std::shuffle(free_q.begin(), free_q.end(), rng);
    std::vector<std::pair<Field*, int>> reused;
    for (auto& f : t.a_fields) {
        if (!f.delimiter) continue;
        if (!free_q.empty() && below(rng, 2)) {
            reused.emplace_back(&f, free_q.back());
            free_q.pop_back();
        } else {
            fresh.push_back(&f);
        }
    }
    std::vector<Field*> need = qd;
    need.insert(need.end(), fresh.begin(), fresh.end());
    const int pool = static_cast<int>(delimiter_pool().size());
    if (static_cast<int>(need.size()) > pool) throw TgtError("delimiter pool exhausted");
    std::vector<int> len(need.size());
    int total = 0;
    for (auto& l : len) total += (l = 1 + below(rng, 2));
    while (total > pool) {
        int i = below(rng, static_cast<int>(len.size()));
        if (len[i] == 2) {
            len[i] = 1;
            --total;
        }
    }
    std::vector<std::string> syms = delimiter_pool();
    std::shuffle(syms.begin(), syms.end(), rng);
    size_t next = 0;
    for (size_t i = 0; i < need.size(); ++i)
        for (int k = 0; k < len[i]; ++k) need[i]->value.push_back(syms[next++]);
    for (auto& [f, qi] : reused) f->value = qd[qi]->value;
    return t;
}

PromptRecord instantiate(Rng& rng, const TemplateSpec& t, int n_shot, SymbolMode mode,
                         const std::vector<int>& lens_choices) {
    const int n = t.q_count();
    std::set<std::string> used;
    std::vector<std::vector<int>> lens;
    auto fill = [&](std::vector<std::vector<std::string>>& vals) {
        std::vector<int> l;
        vals.assign(n, {});
        for (int s = 0; s < n; ++s) {
            int k = pick(rng, lens_choices);
            l.push_back(k);
            for (int j = 0; j < k; ++j) vals[s].push_back(draw_symbol(rng, mode, used));
        }
        lens.push_back(l);
    };
    auto render = [&](const std::vector<Field>& fs, const std::vector<std::vector<std::string>>& vals) {
        std::vector<std::string> out;
        for (const auto& f : fs) {
            const auto& v = f.delimiter ? f.value : vals[f.slot];
            out.insert(out.end(), v.begin(), v.end());
        }
        return out;
    };
    std::vector<std::string> x;
    for (int e = 0; e < n_shot; ++e) {
        std::vector<std::vector<std::string>> vals;
        fill(vals);
        x.push_back("Q");
        for (auto& s : render(t.q_fields, vals)) x.push_back(s);
        x.push_back("A");
        for (auto& s : render(t.a_fields, vals)) x.push_back(s);
        x.push_back(".");
    }
    std::vector<std::vector<std::string>> cue;
    fill(cue);
    x.push_back("Q");
    for (auto& s : render(t.q_fields, cue)) x.push_back(s);
    x.push_back("A");
    std::vector<std::string> y = render(t.a_fields, cue);
    y.push_back(".");

    std::string cl;
    ojson lists = ojson::array();
    for (const auto& l : lens) {
        if (!cl.empty()) cl += ".";
        cl += "Q";
        for (int k : l) cl += std::to_string(k);
        lists.push_back(l);
    }
    std::vector<int> slots;
    for (const auto& f : t.a_fields)
        if (!f.delimiter) slots.push_back(f.slot + 1);
    ojson info = ojson::object();
    info["cons_count"] = "Q" + std::to_string(n) + "A" + std::to_string(t.a_count());
    info["cons_len"] = cl;
    info["q_cons_lens"] = lists;
    info["a_slots"] = slots;
    return {join(x), join(y), info.dump()};
}

PromptRecord echo_record(Rng& rng) {
    std::set<std::string> used;
    std::string a = draw_symbol(rng, SymbolMode::RlwUpper, used);
    std::string b = draw_symbol(rng, SymbolMode::RlwUpper, used);
    return {"Q " + a + " A " + a + " . Q " + b + " A", b + " .", R"({"type":"echo"})"};
}

std::vector<PromptRecord> generate_split(const TaskSpec& task, const SplitSpec& split, int count, uint64_t seed) {
    Rng rng(seed ^ fnv1a(task.name + "/" + split.name));
    SymbolMode mode = split.lexical ? SymbolMode::RlwUpper : task.mode;
    std::vector<PromptRecord> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        if (split.echo && below(rng, 10) == 0) {
            out.push_back(echo_record(rng));
            continue;
        }
        TemplateSpec t = sample_template(rng, pick(rng, split.counts));
        out.push_back(instantiate(rng, t, task.n_shot, mode, split.lens));
    }
    return out;
}

// --- validation ---

namespace {

struct Region {
    std::vector<std::string> q, a;  // a empty for the cue
};

struct Run {
    bool delimiter;
    std::vector<std::string> toks;
};

std::vector<Run> runs_by(const std::vector<std::string>& toks, const std::set<std::string>& delims) {
    std::vector<Run> out;
    for (const auto& t : toks) {
        bool d = delims.count(t) > 0;
        if (out.empty() || out.back().delimiter != d) out.push_back({d, {}});
        out.back().toks.push_back(t);
    }
    return out;
}

bool has_repeat(const std::vector<std::string>& v) {
    std::set<std::string> s(v.begin(), v.end());
    return s.size() != v.size();
}

// answer as a sequence of (slot or -1, delimiter tokens)
struct AnswerField {
    int slot;
    std::vector<std::string> delim;
    bool operator==(const AnswerField&) const = default;
};

}  // namespace

std::vector<Violation> validate_record(const PromptRecord& r) {
    std::vector<Violation> v;
    auto x = split_ws(r.x), y = split_ws(r.y);
    std::vector<Region> ex;
    std::vector<std::string> cue;
    // Q q A a . ... Q c A
    size_t i = 0;
    bool ok = true;
    while (i < x.size() && ok) {
        if (x[i] != "Q") {
            ok = false;
            break;
        }
        Region reg;
        for (++i; i < x.size() && x[i] != "A"; ++i) {
            if (x[i] == "Q" || x[i] == ".") ok = false;
            reg.q.push_back(x[i]);
        }
        if (i >= x.size()) {
            ok = false;
            break;
        }
        ++i;  // A
        if (i == x.size()) {
            cue = reg.q;
            break;
        }
        for (; i < x.size() && x[i] != "."; ++i) {
            if (x[i] == "Q" || x[i] == "A") ok = false;
            reg.a.push_back(x[i]);
        }
        if (i >= x.size()) ok = false;
        ++i;
        ex.push_back(std::move(reg));
        if (i >= x.size()) ok = false;
    }
    if (!ok || ex.empty() || cue.empty()) return {{"structure", "prompt is not (Q .. A .. .)+ Q .. A"}};
    for (const auto& e : ex)
        if (e.q.empty() || e.a.empty()) return {{"structure", "empty example region"}};
    if (y.size() < 2 || y.back() != ".") return {{"structure", "continuation must end with '.'"}};
    std::vector<std::string> b(y.begin(), y.end() - 1);
    for (const auto& t : b)
        if (t == "Q" || t == "A" || t == ".") return {{"structure", "marker inside continuation"}};

    for (const auto& e : ex) {
        if (has_repeat(e.q)) v.push_back({"symbol repetition", "question: " + join(e.q)});
        if (has_repeat(e.a)) v.push_back({"symbol repetition", "answer: " + join(e.a)});
    }
    if (has_repeat(cue)) v.push_back({"symbol repetition", "cue: " + join(cue)});
    if (has_repeat(b)) v.push_back({"symbol repetition", "continuation: " + join(b)});
    if (!v.empty()) return v;

    // shared symbols between the cue and an example question are its delimiters
    std::set<std::string> cue_syms(cue.begin(), cue.end());
    std::vector<AnswerField> tmpl;
    std::vector<std::vector<std::string>> cue_cons;
    for (size_t k = 0; k < ex.size(); ++k) {
        const auto& e = ex[k];
        std::set<std::string> delims;
        for (const auto& t : e.q)
            if (cue_syms.count(t)) delims.insert(t);
        auto qr = runs_by(e.q, delims), cr = runs_by(cue, delims);
        bool same = qr.size() == cr.size();
        for (size_t j = 0; same && j < qr.size(); ++j)
            same = qr[j].delimiter == cr[j].delimiter && (!qr[j].delimiter || qr[j].toks == cr[j].toks);
        if (!same) {
            v.push_back({"delimiter mismatch", "example " + std::to_string(k + 1) + " and cue disagree"});
            continue;
        }
        std::vector<std::vector<std::string>> qc, cc;
        for (size_t j = 0; j < qr.size(); ++j)
            if (!qr[j].delimiter) {
                qc.push_back(qr[j].toks);
                cc.push_back(cr[j].toks);
            }
        if (qc.empty()) {
            v.push_back({"no constituent", "question has no constituent"});
            continue;
        }
        std::map<std::string, int> start_of, member_of;
        for (size_t s = 0; s < qc.size(); ++s) {
            start_of[qc[s][0]] = static_cast<int>(s);
            for (const auto& t : qc[s]) member_of[t] = static_cast<int>(s);
        }
        std::set<std::string> cue_con_syms;
        for (const auto& c : cc) cue_con_syms.insert(c.begin(), c.end());
        std::vector<AnswerField> af;
        std::set<int> seen;
        bool bad = false;
        for (size_t j = 0; j < e.a.size() && !bad;) {
            const std::string& t = e.a[j];
            if (member_of.count(t)) {
                auto it = start_of.find(t);
                int s = it == start_of.end() ? -1 : it->second;
                if (s < 0 || j + qc[s].size() > e.a.size() ||
                    !std::equal(qc[s].begin(), qc[s].end(), e.a.begin() + static_cast<long>(j))) {
                    v.push_back({"answer constituent mismatch", "answer splits a question constituent"});
                    bad = true;
                    break;
                }
                if (!seen.insert(s).second) {
                    v.push_back({"symbol repetition", "answer repeats a constituent"});
                    bad = true;
                    break;
                }
                if (!af.empty() && af.back().slot >= 0) {
                    v.push_back({"adjacent constituents", "answer constituents need a delimiter between them"});
                    bad = true;
                    break;
                }
                af.push_back({s, {}});
                j += qc[s].size();
            } else {
                if (cue_con_syms.count(t)) {
                    v.push_back({"delimiter collision", "answer delimiter '" + t + "' is a cue constituent symbol"});
                    bad = true;
                    break;
                }
                if (af.empty() || af.back().slot >= 0) af.push_back({-1, {}});
                af.back().delim.push_back(t);
                ++j;
            }
        }
        if (bad) continue;
        if (seen.empty()) {
            v.push_back({"no constituent", "answer has no constituent"});
            continue;
        }
        if (k == 0) {
            tmpl = af;
            cue_cons = cc;
        } else if (af != tmpl || cc.size() != cue_cons.size()) {
            v.push_back({"inconsistent examples", "examples follow different templates"});
        }
    }
    if (!v.empty()) return v;
    std::vector<std::string> want;
    for (const auto& f : tmpl) {
        const auto& src = f.slot >= 0 ? cue_cons[f.slot] : f.delim;
        want.insert(want.end(), src.begin(), src.end());
    }
    if (want != b) v.push_back({"gold mismatch", "expected '" + join(want) + " .'"});
    return v;
}

std::string normalize_ws(const std::string& s) { return join(split_ws(s)); }

EvalResult evaluate(const Runner& runner, const std::vector<PromptRecord>& records, int limit) {
    EvalResult r;
    size_t n = limit < 0 ? records.size() : std::min(records.size(), static_cast<size_t>(limit));
    for (size_t i = 0; i < n; ++i) {
        const auto& rec = records[i];
        std::string got;
        bool fine = false;
        try {
            got = runner(rec.x);
            fine = normalize_ws(got) == normalize_ws(rec.y);
        } catch (const std::exception& e) {
            got = std::string("error: ") + e.what();
        }
        ++r.total;
        if (fine) ++r.correct;
        else r.failures.push_back({rec.x, rec.y, got});
    }
    r.accuracy = r.total ? static_cast<double>(r.correct) / r.total : 0.0;
    return r;
}

void write_tsv(const std::filesystem::path& p, const std::vector<PromptRecord>& rs) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw TgtError("cannot write " + p.string());
    for (const auto& r : rs) {
        out << r.x << '\t' << r.y;
        if (!r.info.empty()) out << '\t' << r.info;
        out << '\n';
    }
}

std::vector<PromptRecord> read_tsv(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw TgtError("cannot read " + p.string());
    std::vector<PromptRecord> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        if (t1 == std::string::npos) throw TgtError(p.string() + ":" + std::to_string(n) + ": expected x<TAB>y");
        auto t2 = line.find('\t', t1 + 1);
        PromptRecord r;
        r.x = line.substr(0, t1);
        r.y = line.substr(t1 + 1, t2 == std::string::npos ? std::string::npos : t2 - t1 - 1);
        if (t2 != std::string::npos) r.info = line.substr(t2 + 1);
        out.push_back(std::move(r));
    }
    return out;
}

void write_manifest(const std::filesystem::path& dir, const TaskSpec& task, const std::string& split, int count,
                    uint64_t seed) {
    auto p = dir / "manifest.json";
    ojson m = ojson::object();
    if (std::filesystem::exists(p)) {
        std::ifstream in(p);
        try {
            m = ojson::parse(in);
        } catch (const nlohmann::json::exception&) {
            m = ojson::object();
        }
    }
    m["task"] = task.name;
    m["n_shot"] = task.n_shot;
    if (!m.contains("splits")) m["splits"] = ojson::object();
    m["splits"][split] = {{"file", split + ".tsv"}, {"count", count}, {"seed", seed}};
    std::filesystem::create_directories(dir);
    std::ofstream(p) << m.dump(4) << "\n";
}

}  // namespace tpf::tgt
