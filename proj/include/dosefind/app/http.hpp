#pragma once

// HTTP JSON front end for SessionStore.
//
//   POST /sessions                   create       -> full session record
//   GET  /sessions/{id}              read         -> full session record
//   POST /sessions/{id}/outcomes     {dose, outcomes}
//   POST /sessions/{id}/simulate     {cohorts}    (simulation-assist sessions)
//   POST /sessions/{id}/close                     -> {recommended_mtd}
//
// Every response carries permissive CORS headers so a browser UI served
// from another origin can call the API.

#include <charconv>
#include <cstdlib>
#include <ostream>
#include <string>
#include <utility>

#include <httplib.h>

#include "dosefind/app/session.hpp"

namespace dosefind::app {

struct ListenAddress {
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// "host:port", ":port" or "port".
inline ListenAddress parse_listen(const std::string& s) {
    ListenAddress a;
    const auto colon = s.rfind(':');
    const std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
    if (colon != std::string::npos && colon > 0) a.host = s.substr(0, colon);
    const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), a.port);
    if (port.empty() || ec != std::errc{} || end != port.data() + port.size() || a.port < 0 || a.port > 65535)
        throw Error(ErrorCode::InvalidInput, "listen: expected host:port, got '" + s + "'");
    return a;
}

/// Flag value if given, else $DOSEFIND_LISTEN, else 127.0.0.1:8080.
inline ListenAddress resolve_listen(const std::string& flag) {
    if (!flag.empty()) return parse_listen(flag);
    if (const char* env = std::getenv("DOSEFIND_LISTEN"); env && *env) return parse_listen(env);
    return {};
}

namespace detail {

inline void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <class Fn>
void handle(httplib::Response& res, Fn&& fn) {
    try {
        send(res, 200, fn());
    } catch (const ApiError& e) {
        send(res, e.status(), e.body());
    } catch (const Error& e) {
        send(res, e.code() == ErrorCode::InvalidInput ? 400 : 500, json{{"error", e.what()}});
    } catch (const std::exception& e) {
        send(res, 500, json{{"error", e.what()}});
    }
}

inline json parse_body(const httplib::Request& req, bool allow_empty) {
    if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) {
        if (allow_empty) return json::object();
        throw ApiError(400, "body: expected a JSON object");
    }
    try {
        return json::parse(req.body);
    } catch (const json::parse_error&) {
        throw ApiError(400, "body: malformed JSON");
    }
}

}  // namespace detail

/// Registers the API routes on `server`. The store must outlive the server.
inline void install_routes(httplib::Server& server, SessionStore& store) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
        detail::handle(res, [&] { return store.create(detail::parse_body(req, false)); });
    });
    server.Get(R"(/sessions/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
        detail::handle(res, [&] { return store.get(req.matches[1]); });
    });
    server.Post(R"(/sessions/([^/]+)/outcomes)", [&](const httplib::Request& req, httplib::Response& res) {
        detail::handle(res, [&] { return store.submit(req.matches[1], detail::parse_body(req, false)); });
    });
    server.Post(R"(/sessions/([^/]+)/simulate)", [&](const httplib::Request& req, httplib::Response& res) {
        detail::handle(res, [&] { return store.simulate(req.matches[1], detail::parse_body(req, true)); });
    });
    server.Post(R"(/sessions/([^/]+)/close)", [&](const httplib::Request& req, httplib::Response& res) {
        detail::handle(res, [&] { return store.close(req.matches[1]); });
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) detail::send(res, res.status, json{{"error", httplib::status_message(res.status)}});
    });
}

/// Blocks serving the API until the server is stopped.
inline void serve(const ListenAddress& addr, SessionStore& store, std::ostream& log) {
    httplib::Server server;
    install_routes(server, store);
    if (!server.bind_to_port(addr.host, addr.port))
        throw Error(ErrorCode::Io, "cannot listen on " + addr.host + ":" + std::to_string(addr.port));
    log << "listening on " << addr.host << ":" << addr.port << std::endl;
    server.listen_after_bind();
}

}  // namespace dosefind::app
