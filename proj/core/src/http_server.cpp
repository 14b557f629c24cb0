// Copyright 2026 The fer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <list>
#include <sys/socket.h>
#include <thread>

#include "fer/error.hpp"
#include "fer/service.hpp"

namespace fer {

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

constexpr std::uint64_t kMaxBody = 32u << 20;

}  // namespace

struct HttpServer::Impl {
  Service& service;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::thread accept_thread;

  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopping = false;
  bool stopped = false;
  struct Connection {
    std::shared_ptr<tcp::socket> socket;
    std::thread thread;
    bool done = false;
  };
  std::list<Connection> connections;

  Impl(Service& s, const std::string& address, unsigned short port)
      : service(s), acceptor(ioc) {
    const tcp::endpoint endpoint(net::ip::make_address(address), port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen();
  }

  void accept_loop() {
    while (true) {
      auto socket = std::make_shared<tcp::socket>(ioc);
      beast::error_code ec;
      acceptor.accept(*socket, ec);
      std::lock_guard lock(mu);
      if (stopping) break;
      if (ec) continue;
      reap_finished();
      connections.push_back({socket, {}, false});
      auto it = std::prev(connections.end());
      it->thread = std::thread([this, it] {
        serve(*it->socket);
        std::lock_guard done_lock(mu);
        it->done = true;
      });
    }
  }

  // Caller holds mu.
  void reap_finished() {
    for (auto it = connections.begin(); it != connections.end();) {
      if (it->done) {
        it->thread.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve(tcp::socket& socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    while (true) {
      http::request_parser<http::string_body> parser;
      parser.body_limit(kMaxBody);
      http::read(socket, buffer, parser, ec);
      if (ec == http::error::body_limit) {
        write_plain(socket, 413, R"({"error":"body too large"})", false);
        break;
      }
      if (ec) break;
      http::request<http::string_body> req = parser.release();

      if (websocket::is_upgrade(req)) {
        const std::string target(req.target());
        const auto id = service.live_session(target);
        if (!id) {
          const bool live = service.is_live_path(target);
          write_plain(socket, 404,
                      live ? R"({"error":"unknown session"})"
                           : R"({"error":"no such endpoint"})",
                      false);
          break;
        }
        run_websocket(socket, std::move(req), *id);
        break;
      }

      HttpRequest request;
      request.method = std::string(req.method_string());
      request.target = std::string(req.target());
      request.body = std::move(req.body());
      if (const auto it = req.find("X-Filename"); it != req.end()) {
        request.filename = std::string(it->value());
      }
      const HttpResponse r = service.handle(request);

      http::response<http::string_body> res{
          static_cast<http::status>(r.status), req.version()};
      res.set(http::field::server, "fer");
      res.set(http::field::content_type, r.content_type);
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(req.keep_alive());
      if (req.method() != http::verb::head) res.body() = r.body;
      res.prepare_payload();
      http::write(socket, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    socket.shutdown(tcp::socket::shutdown_both, ec);
    socket.close(ec);
  }

  static void write_plain(tcp::socket& socket, int status,
                          const std::string& body, bool keep_alive) {
    http::response<http::string_body> res{static_cast<http::status>(status),
                                          11};
    res.set(http::field::content_type, "application/json");
    res.keep_alive(keep_alive);
    res.body() = body;
    res.prepare_payload();
    beast::error_code ec;
    http::write(socket, res, ec);
  }

  void run_websocket(tcp::socket& socket, http::request<http::string_body> req,
                     const std::string& session_id) {
    websocket::stream<tcp::socket&> ws(socket);
    ws.read_message_max(kMaxBody);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    beast::flat_buffer buffer;
    while (true) {
      buffer.clear();
      ws.read(buffer, ec);
      if (ec) break;
      const auto data = buffer.data();
      const std::span<const std::uint8_t> bytes(
          static_cast<const std::uint8_t*>(data.data()), data.size());
      const std::string reply =
          service.live_frame(session_id, bytes, ws.got_binary());
      ws.text(true);
      ws.write(net::buffer(reply), ec);
      if (ec) break;
    }
    if (ec != websocket::error::closed) {
      ws.close(websocket::close_code::normal, ec);
    }
  }
};

HttpServer::HttpServer(Service& service, const std::string& address,
                       unsigned short port)
    : impl_(std::make_unique<Impl>(service, address, port)) {}

HttpServer::~HttpServer() { stop(); }

unsigned short HttpServer::port() const noexcept {
  return impl_->acceptor.local_endpoint().port();
}

void HttpServer::start() {
  if (impl_->accept_thread.joinable()) return;
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

void HttpServer::stop() {
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopped) return;
    impl_->stopping = true;
  }
  // shutdown() on the listening socket wakes a blocked accept().
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  beast::error_code ec;
  impl_->acceptor.close(ec);

  std::list<Impl::Connection> connections;
  {
    std::lock_guard lock(impl_->mu);
    for (auto& c : impl_->connections) {
      ::shutdown(c.socket->native_handle(), SHUT_RDWR);
    }
    connections.splice(connections.end(), impl_->connections);
  }
  for (auto& c : connections) {
    if (c.thread.joinable()) c.thread.join();
  }
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

}  // namespace fer
