#include "tpf/assets.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tpf/psl.hpp"

#ifndef TPF_DEFAULT_ASSET_DIR
#define TPF_DEFAULT_ASSET_DIR "programs"
#endif

namespace fs = std::filesystem;

namespace tpf {

fs::path asset_dir() {
    if (const char* e = std::getenv("TPF_ASSET_DIR"); e && *e) return e;
    return TPF_DEFAULT_ASSET_DIR;
}

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool has_declarations(const std::string& src) {
    auto toks = lex_psl(src);
    for (size_t i = 0; i + 1 < toks.size(); ++i)
        if (toks[i].kind == Token::Kind::Ident && toks[i].text == "registers" && toks[i + 1].text == "{") return true;
    return false;
}

std::string with_prelude(const std::string& src, const fs::path& dir) {
    if (has_declarations(src)) return src;
    fs::path pre = dir / "prelude.psl";
    if (!fs::exists(pre)) return src;
    return slurp(pre) + "\n" + src;
}

}  // namespace

std::vector<std::string> list_assets() {
    std::vector<std::string> out{"icl"};
    std::error_code ec;
    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(asset_dir(), ec))
        if (e.path().extension() == ".psl" && e.path().stem() != "prelude") found.push_back(e.path().stem().string());
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
    return out;
}

bool is_asset_name(const std::string& name) {
    auto a = list_assets();
    return std::find(a.begin(), a.end(), name) != a.end();
}

std::string load_program_source(const std::string& name) {
    fs::path dir = asset_dir();
    if (name == "icl")
        return slurp(dir / "prelude.psl") + "\n" + slurp(dir / "parse.psl") + "\n" + slurp(dir / "gen.psl");
    fs::path p = name;
    if (!fs::exists(p) && fs::exists(dir / (name + ".psl"))) p = dir / (name + ".psl");
    if (!fs::exists(p)) throw std::runtime_error("no program or asset named '" + name + "'");
    return with_prelude(slurp(p), p.has_parent_path() ? p.parent_path() : fs::path("."));
}

QkvlProgram compile_source(const std::string& psl) {
    PslProgram p = parse_psl(psl);
    auto diags = lint_program(p);
    for (const auto& d : diags)
        if (d.severity == Diagnostic::Severity::Error) throw CompileError(d.message, d.line);
    return compile_psl(p);
}

QkvlProgram load_program(const std::string& name) {
    fs::path p = name;
    if (p.extension() == ".json" && fs::exists(p)) return deserialize_qkvl(slurp(p));
    return compile_source(load_program_source(name));
}

std::vector<std::string> tokenize(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::string> out;
    for (std::string t; ss >> t;) out.push_back(t);
    return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) {
        if (!s.empty()) s += ' ';
        s += t;
    }
    return s;
}

IclPipeline::IclPipeline(QkvlProgram prog, ModelOptions opts) : prog_(std::move(prog)), opts_(opts) {}

IclPipeline IclPipeline::from_assets() { return IclPipeline(compile_source(load_program_source("icl"))); }

DatModel IclPipeline::build_model(const std::vector<std::string>& prompt, int max_new) const {
    Vocabulary v = Vocabulary::with_reserved(static_cast<int>(prompt.size()) + max_new + 1);
    for (const auto& t : prompt) v.add(t);
    return compile_model(prog_, std::move(v), opts_);
}

GenerateResult IclPipeline::run(const std::vector<std::string>& prompt, const GenerateOptions& opts) const {
    DatModel m = build_model(prompt, opts.max_new);
    GenerateResult r = generate(m, prompt, opts);
    for (const auto& w : prog_.watch)
        for (const auto& [f, s] : prog_.registers)
            if (f == w) r.trace.watch.push_back(s);
    return r;
}

std::vector<std::string> IclPipeline::run_icl(const std::string& prompt) const { return run(tokenize(prompt)).tokens; }

}  // namespace tpf
