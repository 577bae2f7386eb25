#include "tpf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tpf/assets.hpp"
#include "tpf/psl.hpp"
#include "tpf/qkvm.hpp"
#include "tpf/service.hpp"
#include "tpf/tgt.hpp"
#include "tpf/turing.hpp"

namespace tpf {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int cmd_compile(const std::string& input, const std::string& emit, const std::string& output, std::ostream& out,
                std::ostream& err) {
    std::string src = load_program_source(input);
    PslProgram p;
    try {
        p = parse_psl(src);
    } catch (const PslError& e) {
        err << input << ":" << e.line << ":" << e.column << ": error: " << e.what() << "\n";
        return kCompileError;
    }
    auto diags = lint_program(p);
    for (const auto& d : diags)
        err << input << ":" << d.line << ": "
            << (d.severity == Diagnostic::Severity::Error ? "error" : "warning") << ": " << d.message << "\n";
    if (has_errors(diags)) return kCompileError;
    QkvlProgram q = compile_psl(p);
    if (emit == "qkvl") {
        std::string json = serialize_qkvl(q);
        if (output.empty() || output == "-") out << json;
        else write_file(output, json);
        return kOk;
    }
    // weights: build with a vocabulary that covers the program constants and positions up to 128
    std::string prefix = output.empty() ? std::filesystem::path(input).stem().string() : output;
    DatModel m = compile_model(q, Vocabulary::with_reserved(128));
    dump_weights(m, prefix);
    out << "wrote " << prefix << ".bin and " << prefix << ".json (" << m.layer_count() << " layers, "
        << m.schema.size() << " registers x " << m.schema.d_register() << ")\n";
    return kOk;
}

int cmd_run(const std::string& program, const std::string& prompt, const std::string& trace_path,
            const std::string& level, int max_new, const std::string& stop, bool oracle, bool stats, std::ostream& out,
            std::ostream& err) {
    auto toks = tokenize(prompt);
    if (toks.empty()) throw Usage("empty prompt");
    auto lv = parse_trace_level(level);
    if (!lv) throw Usage("--trace-level must be none, registers or full");
    IclPipeline pipe(load_program(program));
    GenerateOptions go;
    go.max_new = max_new;
    go.stop_symbol = stop;
    go.collect_stats = stats;
    go.trace_level = trace_path.empty() ? TraceLevel::None : *lv;
    GenerateResult r = pipe.run(toks, go);
    out << join_tokens(r.tokens) << "\n";
    if (r.truncated) err << "note: stopped after " << max_new << " tokens without '" << stop << "'\n";
    if (stats)
        err << "forwards " << r.stats.forwards << ", layer evaluations " << r.stats.layer_evals << ", max delta_hat "
            << r.stats.max_delta_hat << "\n";
    if (!trace_path.empty()) write_file(trace_path, r.trace.to_json() + "\n");
    if (oracle) {
        QkvmOptions qo;
        qo.max_position = static_cast<int>(toks.size()) + max_new + 1;
        auto sym = qkvm_generate(pipe.program(), toks, stop, max_new, qo);
        if (sym.tokens != r.tokens || sym.truncated != r.truncated) {
            err << "oracle mismatch: symbolic machine produced '" << join_tokens(sym.tokens) << "'\n";
            return kRuntimeError;
        }
        err << "oracle: numeric and symbolic runs agree\n";
    }
    return kOk;
}

int cmd_gen_data(const std::string& task, const std::string& split, int count, uint64_t seed,
                 const std::string& dir, std::ostream& out) {
    auto t = tgt::parse_task(task);
    auto s = tgt::parse_split(split);
    auto recs = tgt::generate_split(t, s, count, seed);
    std::filesystem::path base = std::filesystem::path(dir) / task;
    auto file = base / (split + ".tsv");
    tgt::write_tsv(file, recs);
    tgt::write_manifest(base, t, split, count, seed);
    out << "wrote " << recs.size() << " records to " << file.string() << "\n";
    return kOk;
}

int cmd_eval(const std::string& file, int limit, const std::string& program, int show, std::ostream& out) {
    auto recs = tgt::read_tsv(file);
    IclPipeline pipe(load_program(program));
    auto res = tgt::evaluate([&](const std::string& x) { return join_tokens(pipe.run_icl(x)); }, recs, limit);
    out << "accuracy " << std::fixed << std::setprecision(4) << res.accuracy << " (" << res.correct << "/"
        << res.total << ")\n";
    for (int i = 0; i < show && i < static_cast<int>(res.failures.size()); ++i) {
        const auto& f = res.failures[i];
        out << "FAIL " << f.x << "\n  gold " << f.gold << "\n  got  " << f.got << "\n";
    }
    return kOk;
}

int cmd_validate(const std::string& file, std::ostream& out) {
    auto recs = tgt::read_tsv(file);
    int bad = 0;
    for (size_t i = 0; i < recs.size(); ++i) {
        auto v = tgt::validate_record(recs[i]);
        if (v.empty()) continue;
        ++bad;
        out << "record " << i + 1 << ": " << v[0].kind << ": " << v[0].detail << "\n";
    }
    out << recs.size() - bad << "/" << recs.size() << " records valid\n";
    return bad ? kRuntimeError : kOk;
}

int cmd_tm_run(const std::string& table, const std::string& tape, int head, bool utm, int max_sweeps,
               const std::string& trace_path, bool show_psl, std::ostream& out) {
    auto t = tm::parse_table_json(read_file(table));
    if (show_psl) {
        out << (utm ? tm::utm_psl_source() : tm::tm_psl_source(t));
        return kOk;
    }
    auto cells = tokenize(tape);
    TraceLevel lv = trace_path.empty() ? TraceLevel::None : TraceLevel::Registers;
    auto r = utm ? tm::run_utm(t, cells, head, max_sweeps, lv) : tm::run_fixed(t, cells, head, max_sweeps, lv);
    out << "tape  " << join_tokens(r.tape) << "\n";
    if (r.fell_off) out << "head  fell off tape\n";
    else out << "head  " << r.head << "\nstate " << r.state << "\n";
    out << "status " << (r.halted ? "halted" : r.fell_off ? "fell off tape" : "no applicable rule") << " after "
        << r.sweeps << " sweeps\n";
    if (!trace_path.empty()) write_file(trace_path, r.raw.trace.to_json() + "\n");
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tpf: compile production-system programs to discrete-attention transformers and run them"};
    app.require_subcommand(1);

    std::string c_in, c_emit = "qkvl", c_out;
    auto* compile = app.add_subcommand("compile", "compile a PSL program to QKVL JSON or weights");
    compile->add_option("input", c_in, "PSL file or asset name")->required();
    compile->add_option("--emit", c_emit)->check(CLI::IsMember({"qkvl", "weights"}));
    compile->add_option("-o,--output", c_out, "output file (qkvl) or prefix (weights)");

    std::string r_prog = "icl", r_prompt, r_trace, r_level = "registers", r_stop = ".";
    int r_max = 64;
    bool r_oracle = false, r_stats = false;
    auto* run = app.add_subcommand("run", "generate a continuation for a prompt");
    run->add_option("--program", r_prog, "asset name, .psl file or .json QKVL file");
    run->add_option("--prompt", r_prompt)->required();
    run->add_option("--trace", r_trace, "write the trace JSON here");
    run->add_option("--trace-level", r_level);
    run->add_option("--max-new", r_max)->check(CLI::Range(1, 4096));
    run->add_option("--stop", r_stop);
    run->add_flag("--oracle", r_oracle, "check against the symbolic QKV machine");
    run->add_flag("--stats", r_stats);

    std::string g_task = "1_shot_rlw", g_split = "test", g_out = "tasks";
    int g_count = 200;
    uint64_t g_seed = 1;
    auto* gen = app.add_subcommand("gen-data", "generate a TGT dataset split");
    gen->add_option("--task", g_task);
    gen->add_option("--split", g_split);
    gen->add_option("--count", g_count)->check(CLI::Range(0, 10000000));
    gen->add_option("--seed", g_seed);
    gen->add_option("--out", g_out);

    std::string e_split, e_prog = "icl";
    int e_limit = -1, e_show = 0;
    auto* ev = app.add_subcommand("eval", "score the DAT on a split file");
    ev->add_option("--split", e_split, "TSV split file")->required();
    ev->add_option("--limit", e_limit);
    ev->add_option("--program", e_prog);
    ev->add_option("--show-failures", e_show);

    std::string v_split;
    auto* val = app.add_subcommand("validate", "check every record of a split file");
    val->add_option("--split", v_split)->required();

    std::string t_table, t_tape, t_trace;
    int t_head = 0, t_sweeps = 1000;
    bool t_utm = false, t_psl = false;
    auto* tmr = app.add_subcommand("tm-run", "run a Turing machine table on the DAT");
    tmr->add_option("--table", t_table)->required();
    tmr->add_option("--tape", t_tape, "space-separated symbols");
    tmr->add_option("--head", t_head);
    tmr->add_flag("--utm", t_utm, "encode the table in the prompt and run the universal program");
    tmr->add_option("--max-sweeps", t_sweeps);
    tmr->add_option("--trace", t_trace);
    tmr->add_flag("--print-psl", t_psl, "print the generated PSL program and exit");

    std::string s_host = "127.0.0.1";
    int s_port = 8080;
    auto* srv = app.add_subcommand("serve", "serve the JSON API");
    srv->add_option("--host", s_host);
    srv->add_option("--port", s_port);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*compile) return cmd_compile(c_in, c_emit, c_out, out, err);
        if (*run) return cmd_run(r_prog, r_prompt, r_trace, r_level, r_max, r_stop, r_oracle, r_stats, out, err);
        if (*gen) return cmd_gen_data(g_task, g_split, g_count, g_seed, g_out, out);
        if (*ev) return cmd_eval(e_split, e_limit, e_prog, e_show, out);
        if (*val) return cmd_validate(v_split, out);
        if (*tmr) {
            if (t_tape.empty() && !t_psl) throw Usage("--tape is required");
            return cmd_tm_run(t_table, t_tape, t_head, t_utm, t_sweeps, t_trace, t_psl, out);
        }
        if (*srv) {
            out << "listening on http://" << s_host << ":" << s_port << "\n" << std::flush;
            if (!serve(s_host, s_port)) {
                err << "error: cannot listen on " << s_host << ":" << s_port << "\n";
                return kUsage;
            }
            return kOk;
        }
    } catch (const PslError& e) {
        err << "error: " << e.line << ":" << e.column << ": " << e.what() << "\n";
        return kCompileError;
    } catch (const CompileError& e) {
        err << "error: " << (e.line ? std::to_string(e.line) + ": " : "") << e.what() << "\n";
        return kCompileError;
    } catch (const EngineError& e) {
        err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const SchemaError& e) {
        err << "runtime error: " << e.what() << "\n";
        return kRuntimeError;
    } catch (const tm::TmError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const tgt::TgtError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace tpf
