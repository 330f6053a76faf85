// Copyright 2026 The cocarry Authors
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

#include "cocarry/ws_server.hpp"

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "cocarry/error.hpp"

namespace cocarry {

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

// All socket operations run on the io_context thread; other threads post
// outgoing messages into the write queue.
class Connection : public Channel {
 public:
  Connection(net::io_context& io, tcp::socket socket) : io_(io), ws_(std::move(socket)) {}

  void accept() {
    ws_.accept();
    ws_.text(true);
  }

  void send(const Message& m) override {
    if (!connected_) return;
    auto text = std::make_shared<std::string>(nlohmann::json(m).dump());
    net::post(io_, [this, text] {
      queue_.push_back(std::move(*text));
      if (queue_.size() == 1) write_next();
    });
  }

  bool connected() const override { return connected_; }

  void set_session(Session* s) {
    std::lock_guard lock(session_mu_);
    session_ = s;
  }

  void start_reading() {
    ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        connected_ = false;
        return;
      }
      on_text(beast::buffers_to_string(buffer_.data()));
      buffer_.consume(buffer_.size());
      start_reading();
    });
  }

  void close() {
    net::post(io_, [this] {
      beast::error_code ec;
      if (queue_.empty()) {
        ws_.close(websocket::close_code::normal, ec);
      } else {
        closing_ = true;
      }
    });
  }

 private:
  void write_next() {
    ws_.async_write(net::buffer(queue_.front()), [this](beast::error_code ec, std::size_t) {
      if (ec) {
        connected_ = false;
        queue_.clear();
        return;
      }
      queue_.pop_front();
      if (!queue_.empty()) {
        write_next();
      } else if (closing_) {
        beast::error_code ignored;
        ws_.close(websocket::close_code::normal, ignored);
      }
    });
  }

  void on_text(const std::string& text) {
    Message reply;
    try {
      const Message m = nlohmann::json::parse(text).get<Message>();
      std::lock_guard lock(session_mu_);
      if (session_ == nullptr) {
        reply = {"error", m.tick, {{"message", "no trial in progress"}}};
      } else if (auto r = session_->handle(m)) {
        reply = *r;
      } else {
        return;
      }
    } catch (const std::exception& e) {
      reply = {"error", 0, {{"message", e.what()}}};
    }
    queue_.push_back(nlohmann::json(reply).dump());
    if (queue_.size() == 1) write_next();
  }

  net::io_context& io_;
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  std::atomic<bool> connected_{true};
  std::mutex session_mu_;
  Session* session_ = nullptr;
};

}  // namespace

int serve(const ServeOptions& options) {
  if (!options.make_config) throw Error("serve: no session configuration");
  net::io_context io;
  tcp::acceptor acceptor(io);
  try {
    const tcp::endpoint ep(net::ip::make_address(options.address), options.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error(std::string("serve: cannot listen: ") + e.what());
  }
  if (options.on_listening) options.on_listening(acceptor.local_endpoint().port());

  tcp::socket socket = acceptor.accept();
  Connection conn(io, std::move(socket));
  try {
    conn.accept();
  } catch (const boost::system::system_error& e) {
    throw Error(std::string("serve: websocket handshake failed: ") + e.what());
  }
  conn.start_reading();

  int completed = 0;
  std::thread trials([&] {
    for (int i = 0; i < options.trials && conn.connected(); ++i) {
      SessionConfig cfg = options.make_config(i);
      cfg.realtime = true;
      Session session(std::move(cfg), options.model);
      conn.set_session(&session);
      const TrialLog log = run_trial(session, conn);
      conn.set_session(nullptr);
      if (!options.log_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "trial-%03d.json", i);
        save_trial_log(log, options.log_dir / name);
      }
      if (log.valid) ++completed;
    }
    conn.close();
  });
  io.run();
  trials.join();
  return completed;
}

}  // namespace cocarry
