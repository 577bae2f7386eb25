#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tpf/qkvl.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TPF_FIXTURE_DIR) / name; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline const tpf::QkvlEntry* find_entry(const std::vector<tpf::QkvlEntry>& es, const std::string& needle) {
    for (const auto& e : es) {
        const std::string& c = e.is_repeat ? e.comment : e.layer.comment;
        if (c.find(needle) != std::string::npos) return &e;
        if (e.is_repeat)
            if (auto* r = find_entry(e.body, needle)) return r;
    }
    return nullptr;
}

// JSON form of a single entry, as it appears inside a serialized program
inline nlohmann::ordered_json entry_json(const tpf::QkvlProgram& prog, const tpf::QkvlEntry& e) {
    tpf::QkvlProgram one = prog;
    one.entries = {e};
    return nlohmann::ordered_json::parse(tpf::serialize_qkvl(one))["weights"][0];
}

}  // namespace testutil
