#pragma once

// HTTP front end for SessionManager. Routes live under /api/v1; the field
// reference is docs/api.md.

#include "reveal/error.hpp"
#include "reveal/session.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace reveal {

int http_status(ErrorCode code) noexcept;

class SessionServer {
public:
    explicit SessionServer(SessionManager& manager);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds host:port (port 0 picks a free port). Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace reveal
