#pragma once

// One random edit of a TGT record: swap, drop, duplicate or replace a token,
// or insert a delimiter symbol. The result may or may not still be valid.

#include <random>

#include "oracles/segment_oracle.hpp"
#include "tpf/tgt.hpp"

namespace testutil {

inline tpf::tgt::PromptRecord mutate_record(const tpf::tgt::PromptRecord& r, std::mt19937_64& rng) {
    auto x = oracle::words(r.x), y = oracle::words(r.y);
    auto& t = rng() % 3 ? x : y;
    auto join = [](const oracle::Toks& v) {
        std::string s;
        for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
        return s;
    };
    auto idx = [&](size_t n) { return static_cast<size_t>(rng() % n); };
    const auto& pool = tpf::tgt::delimiter_pool();
    switch (rng() % 6) {
        case 0: std::swap(t[idx(t.size())], t[idx(t.size())]); break;
        case 1: t.erase(t.begin() + static_cast<long>(idx(t.size()))); break;
        case 2: t.insert(t.begin() + static_cast<long>(idx(t.size() + 1)), t[idx(t.size())]); break;
        case 3: t[idx(t.size())] = x[idx(x.size())]; break;
        case 4: t.insert(t.begin() + static_cast<long>(idx(t.size() + 1)), pool[idx(pool.size())]); break;
        case 5: t[idx(t.size())] = "zz"; break;
    }
    return {join(x), join(y), ""};
}

}  // namespace testutil
