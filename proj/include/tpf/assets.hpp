#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tpf/engine.hpp"
#include "tpf/qkvl.hpp"

namespace tpf {

// TPF_ASSET_DIR if set, else the directory baked in at build time.
std::filesystem::path asset_dir();

// "icl" plus every .psl asset other than the prelude.
std::vector<std::string> list_assets();

// Asset name ("icl", "parse", "gen") or a path to a .psl file. Sources without a
// registers declaration get the prelude found next to them prepended.
std::string load_program_source(const std::string& name_or_path);
bool is_asset_name(const std::string& name);

QkvlProgram compile_source(const std::string& psl);
// asset name, .psl file, or compiled .json QKVL file
QkvlProgram load_program(const std::string& name_or_path);

std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& toks);

class IclPipeline {
   public:
    explicit IclPipeline(QkvlProgram prog, ModelOptions opts = {});
    static IclPipeline from_assets();

    // Vocabulary covers reserved tokens, positions up to prompt + max_new + 1, and the prompt symbols.
    DatModel build_model(const std::vector<std::string>& prompt, int max_new) const;
    GenerateResult run(const std::vector<std::string>& prompt, const GenerateOptions& opts = {}) const;
    std::vector<std::string> run_icl(const std::string& prompt) const;
    const QkvlProgram& program() const { return prog_; }

   private:
    QkvlProgram prog_;
    ModelOptions opts_;
};

}  // namespace tpf
