#pragma once

// Brute-force TGT record checker. A record is well formed iff some template
// (alternating delimiter / constituent fields) explains every example question,
// the cue, every example answer and the gold continuation, with each symbol used
// at most once per string and constituent symbols never shared between two
// constituent instances or reused as delimiters. Every admissible segmentation
// is enumerated; nothing is inferred from which symbols happen to be shared.

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Toks = std::vector<std::string>;

inline Toks words(const std::string& s) {
    std::istringstream in(s);
    Toks out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

struct Seg {
    bool delim;
    Toks toks;
};
using Segmentation = std::vector<Seg>;

// Simultaneous segmentation of question q and cue c: delimiter fields equal in
// both, constituent fields nonempty, fields alternate in kind.
inline void segment_pair(const Toks& q, const Toks& c, size_t i, size_t j, Segmentation& sq, Segmentation& sc,
                         std::vector<std::pair<Segmentation, Segmentation>>& out) {
    if (i == q.size() && j == c.size()) {
        if (!sq.empty()) out.emplace_back(sq, sc);
        return;
    }
    if (i == q.size() || j == c.size()) return;
    bool prev_delim = !sq.empty() && sq.back().delim;
    bool prev_cons = !sq.empty() && !sq.back().delim;
    if (!prev_delim) {
        for (size_t len = 1; i + len <= q.size() && j + len <= c.size(); ++len) {
            if (!std::equal(q.begin() + i, q.begin() + i + len, c.begin() + j)) break;
            sq.push_back({true, Toks(q.begin() + i, q.begin() + i + len)});
            sc.push_back({true, Toks(c.begin() + j, c.begin() + j + len)});
            segment_pair(q, c, i + len, j + len, sq, sc, out);
            sq.pop_back();
            sc.pop_back();
        }
    }
    if (!prev_cons) {
        for (size_t a = 1; i + a <= q.size(); ++a)
            for (size_t b = 1; j + b <= c.size(); ++b) {
                sq.push_back({false, Toks(q.begin() + i, q.begin() + i + a)});
                sc.push_back({false, Toks(c.begin() + j, c.begin() + j + b)});
                segment_pair(q, c, i + a, j + b, sq, sc, out);
                sq.pop_back();
                sc.pop_back();
            }
    }
}

// answer field: slot index into the question constituents, or -1 with literal tokens
struct AField {
    int slot;
    Toks toks;
    bool operator==(const AField&) const = default;
};
using ATemplate = std::vector<AField>;

inline void segment_answer(const Toks& a, size_t i, const std::vector<Toks>& cons, const std::set<std::string>& banned,
                           std::vector<bool>& used, ATemplate& cur, std::vector<ATemplate>& out) {
    if (i == a.size()) {
        bool any = std::any_of(cur.begin(), cur.end(), [](const AField& f) { return f.slot >= 0; });
        if (any) out.push_back(cur);
        return;
    }
    bool prev_delim = !cur.empty() && cur.back().slot < 0;
    bool prev_cons = !cur.empty() && cur.back().slot >= 0;
    if (!prev_delim) {
        for (size_t len = 1; i + len <= a.size(); ++len) {
            if (banned.count(a[i + len - 1])) break;
            cur.push_back({-1, Toks(a.begin() + i, a.begin() + i + len)});
            segment_answer(a, i + len, cons, banned, used, cur, out);
            cur.pop_back();
        }
    }
    if (!prev_cons) {
        for (size_t s = 0; s < cons.size(); ++s) {
            if (used[s] || i + cons[s].size() > a.size()) continue;
            if (!std::equal(cons[s].begin(), cons[s].end(), a.begin() + i)) continue;
            used[s] = true;
            cur.push_back({static_cast<int>(s), cons[s]});
            segment_answer(a, i + cons[s].size(), cons, banned, used, cur, out);
            cur.pop_back();
            used[s] = false;
        }
    }
}

struct Parsed {
    std::vector<std::pair<Toks, Toks>> examples;
    Toks cue, gold;
};

inline bool is_marker(const std::string& t) { return t == "Q" || t == "A" || t == "."; }

inline bool parse_record(const std::string& x, const std::string& y, Parsed& p) {
    Toks t = words(x), g = words(y);
    size_t i = 0;
    auto body = [&](const std::string& end, Toks& out) {
        while (i < t.size() && !is_marker(t[i])) out.push_back(t[i++]);
        if (i >= t.size() || t[i] != end || out.empty()) return false;
        ++i;
        return true;
    };
    for (;;) {
        if (i >= t.size() || t[i] != "Q") return false;
        ++i;
        Toks q, a;
        if (!body("A", q)) return false;
        if (i == t.size()) {
            p.cue = q;
            break;
        }
        if (!body(".", a)) return false;
        p.examples.emplace_back(q, a);
    }
    if (p.examples.empty()) return false;
    if (g.size() < 2 || g.back() != ".") return false;
    g.pop_back();
    for (const auto& w : g)
        if (is_marker(w)) return false;
    p.gold = g;
    return true;
}

inline bool distinct(const Toks& v) { return std::set<std::string>(v.begin(), v.end()).size() == v.size(); }

inline bool record_ok(const std::string& x, const std::string& y) {
    Parsed p;
    if (!parse_record(x, y, p)) return false;
    if (!distinct(p.cue) || !distinct(p.gold)) return false;
    for (const auto& [q, a] : p.examples)
        if (!distinct(q) || !distinct(a)) return false;

    // candidate (question/cue segmentation, answer template) per example
    struct Cand {
        Segmentation sq, sc;
        ATemplate at;
    };
    std::vector<std::vector<Cand>> per;
    for (const auto& [q, a] : p.examples) {
        std::vector<std::pair<Segmentation, Segmentation>> pairs;
        Segmentation sq, sc;
        segment_pair(q, p.cue, 0, 0, sq, sc, pairs);
        std::vector<Cand> cands;
        for (auto& [a_q, a_c] : pairs) {
            std::vector<Toks> qcons;
            std::set<std::string> qsyms, csyms, delims;
            for (const auto& s : a_q) {
                if (s.delim) delims.insert(s.toks.begin(), s.toks.end());
                else {
                    qcons.push_back(s.toks);
                    qsyms.insert(s.toks.begin(), s.toks.end());
                }
            }
            for (const auto& s : a_c)
                if (!s.delim) csyms.insert(s.toks.begin(), s.toks.end());
            bool clash = false;
            for (const auto& w : qsyms) clash |= csyms.count(w) || delims.count(w);
            for (const auto& w : csyms) clash |= delims.count(w);
            if (clash) continue;
            std::set<std::string> banned = qsyms;
            banned.insert(csyms.begin(), csyms.end());
            std::vector<ATemplate> ats;
            std::vector<bool> used(qcons.size(), false);
            ATemplate cur;
            segment_answer(a, 0, qcons, banned, used, cur, ats);
            for (auto& at : ats) cands.push_back({a_q, a_c, at});
        }
        if (cands.empty()) return false;
        per.push_back(std::move(cands));
    }

    auto kinds = [](const Segmentation& s) {
        std::vector<std::pair<bool, Toks>> k;
        for (const auto& f : s) k.emplace_back(f.delim, f.delim ? f.toks : Toks{});
        return k;
    };
    // constituent symbols of different examples must not meet either
    std::function<bool(size_t, const Cand*, std::set<std::string>&)> pick = [&](size_t e, const Cand* first,
                                                                                 std::set<std::string>& seen) {
        if (e == per.size()) {
            Toks want;
            for (const auto& f : first->at) {
                if (f.slot < 0) want.insert(want.end(), f.toks.begin(), f.toks.end());
                else {
                    int k = -1;
                    for (const auto& s : first->sc)
                        if (!s.delim && ++k == f.slot) want.insert(want.end(), s.toks.begin(), s.toks.end());
                }
            }
            return want == p.gold;
        }
        for (const auto& c : per[e]) {
            if (first) {
                if (kinds(c.sq) != kinds(first->sq)) continue;
                ATemplate a1 = c.at, a0 = first->at;
                for (auto& f : a1) if (f.slot >= 0) f.toks.clear();
                for (auto& f : a0) if (f.slot >= 0) f.toks.clear();
                if (a1 != a0) continue;
            }
            std::vector<std::string> mine;
            for (const auto& s : c.sq)
                if (!s.delim) mine.insert(mine.end(), s.toks.begin(), s.toks.end());
            bool clash = std::any_of(mine.begin(), mine.end(), [&](const std::string& w) { return seen.count(w) > 0; });
            if (clash) continue;
            seen.insert(mine.begin(), mine.end());
            bool ok = pick(e + 1, first ? first : &c, seen);
            for (const auto& w : mine) seen.erase(w);
            if (ok) return true;
        }
        return false;
    };
    std::set<std::string> seen;
    return pick(0, nullptr, seen);
}

}  // namespace oracle
