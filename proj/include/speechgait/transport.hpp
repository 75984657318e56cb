#pragma once

// Network side of the engine: UDP command intake and the UI service
// (WebSocket /telemetry, /command, /state plus plain HTTP GET /state).
// All sockets live on one io_context thread; the control loop talks to it
// only through BoundedQueue (commands in) and Broadcast (samples out).

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio/awaitable.hpp>
#include <boost/asio/co_spawn.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/ip/udp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/use_awaitable.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "speechgait/channels.hpp"
#include "speechgait/config.hpp"
#include "speechgait/engine.hpp"
#include "speechgait/envelope.hpp"
#include "speechgait/telemetry.hpp"

namespace speechgait {

namespace net = boost::asio;
namespace beast = boost::beast;

struct TransportCounters {
  std::atomic<std::uint64_t> datagrams{0};
  std::atomic<std::uint64_t> malformed{0}; ///< unparseable, oversize or unknown intent name
  std::atomic<std::uint64_t> duplicates{0};
  std::atomic<std::uint64_t> stale{0};
  std::atomic<std::uint64_t> no_intent{0}; ///< text that parsed to nothing
  std::atomic<std::uint64_t> enqueued{0};
  std::atomic<std::uint64_t> queue_full{0};
  std::atomic<std::uint64_t> ws_commands{0};
  std::atomic<std::uint64_t> ws_sessions{0};

  nlohmann::json to_json() const {
    auto v = [](const std::atomic<std::uint64_t>& a) { return a.load(std::memory_order_relaxed); };
    return {{"datagrams", v(datagrams)},   {"malformed", v(malformed)}, {"duplicates", v(duplicates)},
            {"stale", v(stale)},           {"no_intent", v(no_intent)}, {"enqueued", v(enqueued)},
            {"queue_full", v(queue_full)}, {"ws_commands", v(ws_commands)}, {"ws_sessions", v(ws_sessions)}};
  }
};

/// Shared decode path for UDP and /command. Not thread-safe; call from the
/// io thread only.
class CommandIntake {
public:
  enum class Status { enqueued, no_intent, duplicate, stale, malformed, queue_full };

  struct Outcome {
    Status status = Status::malformed;
    std::optional<Intent> intent;
    std::string error;
  };

  CommandIntake(BoundedQueue<Intent>& queue, TransportCounters& counters, Vocabulary vocabulary = default_vocabulary())
      : queue_(queue), counters_(counters), vocabulary_(std::move(vocabulary)) {}

  Outcome accept(std::string_view text, const std::string& peer) {
    Outcome out;
    CommandEnvelope env;
    try {
      env = parse_envelope(text);
      out.intent = resolve(env, vocabulary_);
    } catch (const ParseError& e) {
      counters_.malformed.fetch_add(1, std::memory_order_relaxed);
      out.error = e.what();
      return out;
    }
    switch (filter_.check(env.sender.empty() ? peer : env.sender, env)) {
    case SequenceFilter::Verdict::duplicate:
      counters_.duplicates.fetch_add(1, std::memory_order_relaxed);
      out.status = Status::duplicate;
      return out;
    case SequenceFilter::Verdict::stale:
      counters_.stale.fetch_add(1, std::memory_order_relaxed);
      out.status = Status::stale;
      return out;
    case SequenceFilter::Verdict::accepted:
      break;
    }
    if (!out.intent) {
      counters_.no_intent.fetch_add(1, std::memory_order_relaxed);
      out.status = Status::no_intent;
      return out;
    }
    if (!queue_.try_push(*out.intent)) {
      counters_.queue_full.fetch_add(1, std::memory_order_relaxed);
      out.status = Status::queue_full;
      return out;
    }
    counters_.enqueued.fetch_add(1, std::memory_order_relaxed);
    out.status = Status::enqueued;
    return out;
  }

private:
  BoundedQueue<Intent>& queue_;
  TransportCounters& counters_;
  Vocabulary vocabulary_;
  SequenceFilter filter_;
};

inline std::string_view to_string(CommandIntake::Status s) noexcept {
  switch (s) {
  case CommandIntake::Status::enqueued: return "enqueued";
  case CommandIntake::Status::no_intent: return "no_intent";
  case CommandIntake::Status::duplicate: return "duplicate";
  case CommandIntake::Status::stale: return "stale";
  case CommandIntake::Status::malformed: return "malformed";
  case CommandIntake::Status::queue_full: return "queue_full";
  }
  return "?";
}

/// Latest-value slot. Writers skip the update instead of waiting.
class LatestValue {
public:
  void try_store(std::string value) {
    std::unique_lock lock(mutex_, std::try_to_lock);
    if (lock.owns_lock())
      value_ = std::move(value);
  }
  void store(std::string value) {
    std::lock_guard lock(mutex_);
    value_ = std::move(value);
  }
  std::string load() const {
    std::lock_guard lock(mutex_);
    return value_;
  }

private:
  mutable std::mutex mutex_;
  std::string value_;
};

namespace detail {

inline std::string content_type(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

template <typename Handler>
void spawn(net::io_context& io, net::awaitable<void> task, Handler on_error) {
  net::co_spawn(io, std::move(task), [on_error](std::exception_ptr e) {
    if (e) {
      try {
        std::rethrow_exception(e);
      } catch (const std::exception& ex) {
        on_error(ex.what());
      }
    }
  });
}

} // namespace detail

/// Owns the io thread, the UDP socket and the UI acceptor.
class TransportServer {
public:
  using WebSocket = beast::websocket::stream<beast::tcp_stream>;

  TransportServer(const TransportConfig& config, BoundedQueue<Intent>& queue)
      : config_(config), intake_(queue, counters_),
        udp_(io_), acceptor_(io_) {}

  ~TransportServer() { stop(); }

  /// Binds both endpoints (port 0 picks a free port) and starts the io thread.
  void start() {
    using net::ip::make_address;
    const net::ip::udp::endpoint udp_at(make_address(config_.udp_address), config_.udp_port);
    udp_.open(udp_at.protocol());
    udp_.set_option(net::socket_base::reuse_address(true));
    udp_.bind(udp_at);

    const net::ip::tcp::endpoint ui_at(make_address(config_.ui_address), config_.ui_port);
    acceptor_.open(ui_at.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ui_at);
    acceptor_.listen();

    auto log = [](const std::string&) {};
    detail::spawn(io_, udp_loop(), log);
    detail::spawn(io_, accept_loop(), log);
    thread_ = std::thread([this] { io_.run(); });
  }

  void stop() {
    if (!thread_.joinable())
      return;
    io_.stop();
    thread_.join();
  }

  std::uint16_t udp_port() const { return udp_.local_endpoint().port(); }
  std::uint16_t ui_port() const { return acceptor_.local_endpoint().port(); }

  /// Control-loop side: never blocks.
  void publish_sample(const TelemetrySample& sample) { telemetry_.publish(to_json(sample).dump() + "\n"); }
  void publish_transition(const TransitionRecord& record) { transitions_.publish(to_json(record).dump() + "\n"); }
  void publish_snapshot(const nlohmann::json& snapshot) { snapshot_.try_store(snapshot.dump()); }
  void set_snapshot(const nlohmann::json& snapshot) { snapshot_.store(snapshot.dump()); }

  const TransportCounters& counters() const noexcept { return counters_; }

private:
  nlohmann::json state_message() const {
    auto state = snapshot_.load();
    auto j = state.empty() ? nlohmann::json::object() : nlohmann::json::parse(state);
    j["transport"] = counters_.to_json();
    return j;
  }

  net::awaitable<void> udp_loop() {
    std::vector<char> buffer(config_.max_datagram + 1);
    net::ip::udp::endpoint peer;
    for (;;) {
      const auto n = co_await udp_.async_receive_from(net::buffer(buffer), peer, net::use_awaitable);
      counters_.datagrams.fetch_add(1, std::memory_order_relaxed);
      if (n > config_.max_datagram) {
        counters_.malformed.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      std::ostringstream who;
      who << peer;
      intake_.accept(std::string_view(buffer.data(), n), who.str());
    }
  }

  net::awaitable<void> accept_loop() {
    for (;;) {
      auto socket = co_await acceptor_.async_accept(net::use_awaitable);
      detail::spawn(io_, session(std::move(socket)), [](const std::string&) {});
    }
  }

  net::awaitable<void> session(net::ip::tcp::socket socket) {
    namespace http = beast::http;
    beast::tcp_stream stream(std::move(socket));
    beast::flat_buffer buffer;
    for (;;) {
      http::request<http::string_body> request;
      co_await http::async_read(stream, buffer, request, net::use_awaitable);
      const std::string target(request.target());

      if (beast::websocket::is_upgrade(request)) {
        auto ws = std::make_shared<WebSocket>(std::move(stream));
        co_await ws->async_accept(request, net::use_awaitable);
        if (target != "/telemetry" && target != "/command" && target != "/state") {
          co_await ws->async_close(beast::websocket::close_code::policy_error, net::use_awaitable);
          co_return;
        }
        counters_.ws_sessions.fetch_add(1, std::memory_order_relaxed);
        co_await websocket_session(ws, target);
        co_return;
      }

      http::response<http::string_body> response;
      response.version(request.version());
      response.keep_alive(request.keep_alive());
      if (request.method() == http::verb::get && target == "/state") {
        response.result(http::status::ok);
        response.set(http::field::content_type, "application/json");
        response.body() = state_message().dump();
      } else if (auto file = static_file(request)) {
        response.result(http::status::ok);
        response.set(http::field::content_type, file->first);
        response.body() = std::move(file->second);
      } else {
        response.result(http::status::not_found);
        response.set(http::field::content_type, "text/plain");
        response.body() = "not found\n";
      }
      response.prepare_payload();
      co_await http::async_write(stream, response, net::use_awaitable);
      if (!response.keep_alive())
        break;
    }
    beast::error_code ignored;
    stream.socket().shutdown(net::ip::tcp::socket::shutdown_send, ignored);
  }

  std::optional<std::pair<std::string, std::string>> static_file(
      const beast::http::request<beast::http::string_body>& request) const {
    if (config_.static_dir.empty() || request.method() != beast::http::verb::get)
      return std::nullopt;
    std::string target(request.target());
    target = target.substr(0, target.find('?'));
    if (target.find("..") != std::string::npos || target.empty() || target.front() != '/')
      return std::nullopt;
    auto path = std::filesystem::path(config_.static_dir) / target.substr(1);
    if (target.back() == '/')
      path /= "index.html";
    std::ifstream in(path, std::ios::binary);
    if (!in)
      return std::nullopt;
    std::ostringstream body;
    body << in.rdbuf();
    return std::make_pair(detail::content_type(path), body.str());
  }

  // One reader and one writer per socket. The writer drains `outbox` and,
  // when given, a broadcast subscription.
  net::awaitable<void> websocket_session(std::shared_ptr<WebSocket> ws, std::string path) {
    ws->text(true);
    auto outbox = std::make_shared<std::deque<std::string>>();
    auto closed = std::make_shared<bool>(false);
    std::shared_ptr<Broadcast<std::string>::Subscription> feed;
    if (path == "/telemetry")
      feed = telemetry_.subscribe();
    else if (path == "/command")
      feed = transitions_.subscribe();
    else
      outbox->push_back(state_message().dump());

    detail::spawn(io_, reader(ws, path, outbox, closed), [closed](const std::string&) { *closed = true; });

    net::steady_timer timer(co_await net::this_coro::executor);
    try {
      while (!*closed) {
        if (feed)
          for (auto& line : feed->drain())
            outbox->push_back(std::move(line));
        while (!outbox->empty() && !*closed) {
          const std::string message = std::move(outbox->front());
          outbox->pop_front();
          co_await ws->async_write(net::buffer(message), net::use_awaitable);
        }
        timer.expires_after(std::chrono::milliseconds(5));
        co_await timer.async_wait(net::use_awaitable);
      }
    } catch (const std::exception&) {
    }
    beast::error_code ignored;
    beast::get_lowest_layer(*ws).socket().close(ignored);
  }

  net::awaitable<void> reader(std::shared_ptr<WebSocket> ws, std::string path,
                              std::shared_ptr<std::deque<std::string>> outbox, std::shared_ptr<bool> closed) {
    try {
      for (;;) {
        beast::flat_buffer message;
        co_await ws->async_read(message, net::use_awaitable);
        const std::string text = beast::buffers_to_string(message.data());
        if (path == "/command") {
          counters_.ws_commands.fetch_add(1, std::memory_order_relaxed);
          std::ostringstream who;
          who << "ws:" << beast::get_lowest_layer(*ws).socket().remote_endpoint();
          const auto outcome = intake_.accept(text, who.str());
          nlohmann::json ack = {{"status", std::string(to_string(outcome.status))}};
          if (outcome.intent)
            ack["intent"] = std::string(to_string(*outcome.intent));
          if (!outcome.error.empty())
            ack["error"] = outcome.error;
          outbox->push_back(ack.dump() + "\n");
        } else if (path == "/state") {
          outbox->push_back(state_message().dump());
        }
      }
    } catch (const std::exception&) {
    }
    *closed = true;
  }

  TransportConfig config_;
  TransportCounters counters_;
  CommandIntake intake_;
  net::io_context io_;
  net::ip::udp::socket udp_;
  net::ip::tcp::acceptor acceptor_;
  std::thread thread_;
  Broadcast<std::string> telemetry_{256};
  Broadcast<std::string> transitions_{256};
  LatestValue snapshot_;
};

/// `serve`: transport plus the real-time control loop on the calling thread.
class ServeRuntime {
public:
  explicit ServeRuntime(EngineConfig config)
      : engine_(config), queue_(config.transport.command_queue_capacity),
        server_(config.transport, queue_), decimation_(static_cast<std::int64_t>(std::max<std::size_t>(1, config.transport.telemetry_decimation))) {}

  void start() {
    server_.set_snapshot(engine_.snapshot());
    server_.start();
  }

  /// Runs until `stop` is set or `duration` (if > 0) elapses.
  void run(const std::atomic<bool>& stop, double duration = 0.0, ClockMode mode = ClockMode::realtime) {
    QueueSource source(queue_);
    run_loop(
        engine_, source,
        [this](const TickOutput& out) {
          for (const auto& r : out.transitions)
            server_.publish_transition(r);
          const bool on_beat = engine_.tick_index() % decimation_ == 0;
          if (on_beat)
            server_.publish_sample(out.sample);
          if (on_beat || !out.transitions.empty())
            server_.publish_snapshot(engine_.snapshot());
        },
        LoopOptions{mode, duration, &stop});
  }

  void shutdown() { server_.stop(); }

  Engine& engine() noexcept { return engine_; }
  TransportServer& server() noexcept { return server_; }

private:
  Engine engine_;
  BoundedQueue<Intent> queue_;
  TransportServer server_;
  std::int64_t decimation_;
};

} // namespace speechgait
