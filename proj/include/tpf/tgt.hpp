#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpf::tgt {

struct TgtError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// A run of the template: a constituent slot or a fixed delimiter.
struct Field {
    bool delimiter = false;
    int slot = -1;                    // constituent slot (question order) when !delimiter
    std::vector<std::string> value;   // delimiter symbols
};

struct TemplateSpec {
    std::vector<Field> q_fields;
    std::vector<Field> a_fields;
    int q_count() const;
    int a_count() const;
};

enum class SymbolMode { Rlw, Eng, RlwUpper };

struct TaskSpec {
    int n_shot = 1;
    SymbolMode mode = SymbolMode::Rlw;
    std::string name = "1_shot_rlw";
};
TaskSpec parse_task(const std::string& name);

struct SplitSpec {
    std::string name;
    std::vector<int> counts{1, 2, 4};
    std::vector<int> lens{1, 2, 4};
    bool lexical = false;  // uppercase constituent symbols
    bool echo = false;     // mix in echo prompts
};
SplitSpec parse_split(const std::string& name);
const std::vector<std::string>& split_names();

struct PromptRecord {
    std::string x;
    std::string y;
    std::string info;  // JSON text
};

const std::vector<std::string>& delimiter_pool();

// cons_lens is per constituent slot; empty means sample from {1,2,4}.
TemplateSpec sample_template(Rng& rng, int cons_count);
PromptRecord instantiate(Rng& rng, const TemplateSpec& t, int n_shot, SymbolMode mode,
                         const std::vector<int>& lens_choices);
PromptRecord echo_record(Rng& rng);

std::vector<PromptRecord> generate_split(const TaskSpec& task, const SplitSpec& split, int count, uint64_t seed);

struct Violation {
    std::string kind;  // "structure", "symbol repetition", "constituent overlap", ...
    std::string detail;
};
std::vector<Violation> validate_record(const PromptRecord& r);

struct Failure {
    std::string x, gold, got;
};
struct EvalResult {
    int total = 0;
    int correct = 0;
    double accuracy = 0.0;
    std::vector<Failure> failures;
};
using Runner = std::function<std::string(const std::string&)>;
EvalResult evaluate(const Runner& runner, const std::vector<PromptRecord>& records, int limit = -1);

std::string normalize_ws(const std::string& s);

void write_tsv(const std::filesystem::path& p, const std::vector<PromptRecord>& rs);
std::vector<PromptRecord> read_tsv(const std::filesystem::path& p);
void write_manifest(const std::filesystem::path& dir, const TaskSpec& task, const std::string& split, int count,
                    uint64_t seed);

}  // namespace tpf::tgt
