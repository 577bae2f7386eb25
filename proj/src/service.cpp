#include "tpf/service.hpp"

#include <chrono>
#include <json.hpp>

#include "tpf/assets.hpp"
#include "tpf/psl.hpp"

// after Eigen: httplib's platform headers define macros Eigen's templates trip over
#include <httplib.h>

namespace tpf {

using ojson = nlohmann::ordered_json;

namespace {

ApiResponse reply(int status, const ojson& j) { return {status, j.dump()}; }
ApiResponse error(int status, const std::string& msg) { return reply(status, {{"error", msg}}); }

ojson diag(const std::string& severity, const std::string& msg, int line, int column) {
    ojson d = {{"severity", severity}, {"message", msg}, {"line", line}};
    if (column > 0) d["column"] = column;
    return d;
}

struct Compiled {
    QkvlProgram prog;
    ojson warnings = ojson::array();
};

// Throws ApiResponse (422) on compile errors.
Compiled compile_request(const std::string& program) {
    std::string src;
    try {
        src = is_asset_name(program) ? load_program_source(program) : program;
    } catch (const std::exception& e) {
        throw error(400, e.what());
    }
    try {
        PslProgram p = parse_psl(src);
        Compiled c;
        ojson errors = ojson::array();
        for (const auto& d : lint_program(p)) {
            bool err = d.severity == Diagnostic::Severity::Error;
            (err ? errors : c.warnings).push_back(diag(err ? "error" : "warning", d.message, d.line, 0));
        }
        if (!errors.empty()) throw reply(422, {{"error", "compile error"}, {"diagnostics", errors}});
        c.prog = compile_psl(p);
        return c;
    } catch (const PslError& e) {
        throw reply(422, {{"error", "compile error"}, {"diagnostics", {diag("error", e.what(), e.line, e.column)}}});
    } catch (const CompileError& e) {
        throw reply(422, {{"error", "compile error"}, {"diagnostics", {diag("error", e.what(), e.line, 0)}}});
    }
}

ApiResponse programs() {
    ojson list = ojson::array();
    for (const auto& n : list_assets()) {
        ojson p = {{"name", n}};
        try {
            p["source"] = load_program_source(n);
        } catch (const std::exception& e) {
            p["error"] = e.what();
        }
        list.push_back(std::move(p));
    }
    return reply(200, {{"programs", list}});
}

ApiResponse compile(const ojson& req) {
    std::string program;
    if (req.contains("source") && req["source"].is_string()) program = req["source"];
    else if (req.contains("program") && req["program"].is_string()) program = req["program"];
    else return error(400, "request needs a 'source' or 'program' string");
    Compiled c = compile_request(program);
    ojson q = ojson::parse(serialize_qkvl(c.prog));
    return reply(200, {{"qkvl", q}, {"layers", c.prog.layer_count()}, {"diagnostics", c.warnings}});
}

ApiResponse run(const ojson& req) {
    auto t0 = std::chrono::steady_clock::now();
    std::string program = "icl";
    if (req.contains("program")) {
        if (!req["program"].is_string()) return error(400, "'program' must be a string");
        program = req["program"];
    }
    std::string prompt;
    std::optional<std::string> gold;
    if (req.contains("record")) {
        const auto& r = req["record"];
        if (!r.is_object() || !r.contains("x") || !r["x"].is_string())
            return error(400, "'record' must be an object with string 'x'");
        prompt = r["x"];
        if (r.contains("y") && r["y"].is_string()) gold = r["y"].get<std::string>();
    } else if (req.contains("prompt") && req["prompt"].is_string()) {
        prompt = req["prompt"];
    } else {
        return error(400, "request needs a 'prompt' string or a dataset 'record'");
    }
    auto toks = tokenize(prompt);
    if (toks.empty()) return error(400, "empty prompt");
    GenerateOptions go;
    go.trace_level = TraceLevel::Registers;
    if (req.contains("options")) {
        const auto& o = req["options"];
        if (!o.is_object()) return error(400, "'options' must be an object");
        if (o.contains("max_new")) {
            if (!o["max_new"].is_number_integer() || o["max_new"].get<int>() < 1 || o["max_new"].get<int>() > 1024)
                return error(400, "'max_new' must be an integer in [1, 1024]");
            go.max_new = o["max_new"];
        }
        if (o.contains("stop_symbol")) {
            if (!o["stop_symbol"].is_string()) return error(400, "'stop_symbol' must be a string");
            go.stop_symbol = o["stop_symbol"];
        }
        if (o.contains("trace_level")) {
            auto l = o["trace_level"].is_string() ? parse_trace_level(o["trace_level"]) : std::nullopt;
            if (!l) return error(400, "'trace_level' must be none, registers or full");
            go.trace_level = *l;
        }
    }
    Compiled c = compile_request(program);
    IclPipeline pipe(c.prog);
    GenerateResult r;
    try {
        r = pipe.run(toks, go);
    } catch (const std::exception& e) {
        return error(500, std::string("engine error: ") + e.what());
    }
    ojson resp = ojson::object();
    resp["continuation"] = join_tokens(r.tokens);
    if (gold) resp["gold"] = *gold;
    resp["truncated"] = r.truncated;
    resp["prompt_tokens"] = toks.size();
    resp["trace"] = go.trace_level == TraceLevel::None ? ojson(nullptr) : ojson::parse(r.trace.to_json());
    resp["timing_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return reply(200, resp);
}

}  // namespace

ApiResponse handle_api(const std::string& method, const std::string& path, const std::string& body) {
    try {
        if (path == "/api/health") {
            if (method != "GET") return error(405, "method not allowed");
            return reply(200, {{"status", "ok"}});
        }
        if (path == "/api/programs") {
            if (method != "GET") return error(405, "method not allowed");
            return programs();
        }
        if (path == "/api/compile" || path == "/api/run") {
            if (method != "POST") return error(405, "method not allowed");
            ojson req;
            try {
                req = ojson::parse(body);
            } catch (const nlohmann::json::exception&) {
                return error(400, "request body is not valid JSON");
            }
            if (!req.is_object()) return error(400, "request body must be a JSON object");
            return path == "/api/compile" ? compile(req) : run(req);
        }
        return error(404, "not found");
    } catch (const ApiResponse& r) {
        return r;
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

struct ApiServer::Impl {
    httplib::Server srv;
};

ApiServer::ApiServer() : impl_(std::make_unique<Impl>()) {
    auto bind = [](const char* method) {
        return [method](const httplib::Request& req, httplib::Response& res) {
            ApiResponse r = handle_api(method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body, "application/json");
        };
    };
    for (const char* p : {"/api/health", "/api/programs", "/api/compile", "/api/run"}) {
        impl_->srv.Get(p, bind("GET"));
        impl_->srv.Post(p, bind("POST"));
    }
}

ApiServer::~ApiServer() = default;

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->srv.bind_to_any_port(host);
    return impl_->srv.bind_to_port(host, port) ? port : -1;
}

void ApiServer::run() { impl_->srv.listen_after_bind(); }
void ApiServer::stop() { impl_->srv.stop(); }

bool serve(const std::string& host, int port) {
    ApiServer s;
    if (s.bind(host, port) < 0) return false;
    s.run();
    return true;
}

}  // namespace tpf
