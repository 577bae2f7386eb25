#pragma once

#include <memory>
#include <string>

namespace tpf {

struct ApiResponse {
    int status = 200;
    std::string body;  // JSON
};

// Stateless request handler shared by the HTTP server and the tests.
ApiResponse handle_api(const std::string& method, const std::string& path, const std::string& body);

class ApiServer {
   public:
    ApiServer();
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // port 0 picks a free port; returns the bound port or -1
    int bind(const std::string& host, int port);
    void run();  // blocks until stop()
    void stop();

   private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Blocks until the server stops. Returns false if the port could not be bound.
bool serve(const std::string& host, int port);

}  // namespace tpf
