#pragma once

// WebSocket front end for the session service.
//
// One TCP port serves both the WebSocket endpoint (any path, upgrade request)
// and plain HTTP: GET /maps lists the shipped maps. Each connection runs on its
// own thread with blocking I/O; every text frame is one request and each
// resulting event goes back as its own frame.

#include <atomic>
#include <cstdint>
#include <iostream>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <json.hpp>

#include "evoi/maps.hpp"
#include "evoi/session.hpp"

namespace evoi::session {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

inline nlohmann::json maps_listing() {
    nlohmann::json maps = nlohmann::json::array();
    for (const auto& m : grid::kShippedMaps) {
        const grid::Map parsed = grid::parse_map(m.text);
        maps.push_back({{"name", std::string(m.name)},
                        {"width", parsed.width()},
                        {"height", parsed.height()},
                        {"goals", grid::valid_goals(parsed).size()}});
    }
    return {{"v", kProtocolVersion}, {"maps", maps}};
}

class Server {
public:
    /// Binds immediately; port 0 picks a free port (see port()).
    Server(SessionManager& mgr, std::uint16_t port, const std::string& address = "127.0.0.1")
        : mgr_(mgr), acceptor_(ioc_, tcp::endpoint(net::ip::make_address(address), port)) {}

    ~Server() { stop(); }

    std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

    /// Accepts connections until stop(). Blocks the calling thread.
    void run() {
        while (!stopping_) {
            tcp::socket socket(ioc_);
            beast::error_code ec;
            acceptor_.accept(socket, ec);
            if (ec) {
                if (stopping_) break;
                continue;
            }
            if (stopping_) break;
            std::lock_guard lock(mu_);
            open_.insert(socket.native_handle());
            workers_.emplace_back(&Server::serve, this, std::move(socket));
        }
    }

    /// Stops accepting, drops open connections and joins their threads. Safe to
    /// call from any thread, more than once.
    void stop() {
        if (!stopping_.exchange(true)) {
            // Wake a blocked accept() with a throwaway connection.
            beast::error_code ec;
            tcp::socket poke(ioc_);
            poke.connect(acceptor_.local_endpoint(), ec);
        }
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(mu_);
            for (int fd : open_) ::shutdown(fd, SHUT_RDWR);
            workers.swap(workers_);
        }
        for (auto& t : workers)
            if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    }

private:
    void serve(tcp::socket socket) {
        const int fd = socket.native_handle();
        handle(std::move(socket));
        std::lock_guard lock(mu_);
        open_.erase(fd);
    }

    void handle(tcp::socket socket) {
        try {
            beast::flat_buffer buffer;
            http::request<http::string_body> req;
            http::read(socket, buffer, req);
            if (websocket::is_upgrade(req)) {
                websocket::stream<tcp::socket> ws(std::move(socket));
                ws.accept(req);
                session_loop(ws);
                return;
            }
            http::response<http::string_body> res;
            res.version(req.version());
            res.keep_alive(false);
            res.set(http::field::content_type, "application/json");
            if (req.method() == http::verb::get && req.target() == "/maps") {
                res.result(http::status::ok);
                res.body() = maps_listing().dump();
            } else {
                res.result(http::status::not_found);
                res.body() = nlohmann::json{{"error", "not found"}}.dump();
            }
            res.prepare_payload();
            http::write(socket, res);
            beast::error_code ec;
            socket.shutdown(tcp::socket::shutdown_send, ec);
        } catch (const std::exception& e) {
            if (!stopping_) std::clog << "connection closed: " << e.what() << "\n";
        }
    }

    void session_loop(websocket::stream<tcp::socket>& ws) {
        ws.text(true);
        for (;;) {
            beast::flat_buffer buf;
            beast::error_code ec;
            ws.read(buf, ec);
            if (ec) return;
            for (const auto& ev : handle_message(mgr_, beast::buffers_to_string(buf.data()))) ws.write(net::buffer(ev.dump()));
        }
    }

    SessionManager& mgr_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    std::atomic<bool> stopping_{false};
    std::mutex mu_;
    std::set<int> open_;
    std::vector<std::thread> workers_;
};

}  // namespace evoi::session
