#pragma once

// Client side of the encoder sidecar protocol: newline-delimited JSON over
// a child process's stdio or a local TCP socket.
//
//   -> {"op":"hello"}                 <- {"name":..,"dim":D,"layers":"sum-last-4"}
//   -> {"op":"encode","lang":..,"text":..}
//                                     <- {"dim":D,"tokens":[{"start":s,"end":e,"vec":[..]}..]}
//   errors                            <- {"error":code,"msg":..}

#include <arpa/inet.h>
#include <csignal>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlsim/core/error.hpp"
#include "xlsim/encoder/backends.hpp"
#include "xlsim/encoder/encoding.hpp"

namespace xlsim {

/// One request line out, one response line back.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual std::string request(const std::string& line) = 0;
};

namespace detail {

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

/// Buffered line reader over a file descriptor with a poll() deadline.
class FdLineReader {
 public:
  std::string read_line(int fd, int timeout_ms) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ExternalError("sidecar timeout after " + std::to_string(timeout_ms) + " ms");
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ExternalError(std::string("sidecar poll failed: ") + std::strerror(errno));
      if (r == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ExternalError("sidecar closed the connection");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buf_;
};

inline void write_all(int fd, const std::string& data, bool socket) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + off, data.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ExternalError(std::string("sidecar unreachable: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace detail

/// Sidecar as a child process speaking over its stdin/stdout.
class StdioChannel final : public LineChannel {
 public:
  StdioChannel(const std::vector<std::string>& argv, int timeout_ms) : timeout_ms_(timeout_ms) {
    if (argv.empty()) throw UsageError("sidecar command is empty");
    detail::ignore_sigpipe();
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw ExternalError("cannot create sidecar pipes");
    pid_ = ::fork();
    if (pid_ < 0) throw ExternalError("cannot fork sidecar");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    ::fcntl(in_, F_SETFD, FD_CLOEXEC);
    ::fcntl(out_, F_SETFD, FD_CLOEXEC);
  }

  ~StdioChannel() override {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }

  StdioChannel(const StdioChannel&) = delete;
  StdioChannel& operator=(const StdioChannel&) = delete;

  std::string request(const std::string& line) override {
    detail::write_all(in_, line + "\n", false);
    return reader_.read_line(out_, timeout_ms_);
  }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  int timeout_ms_;
  detail::FdLineReader reader_;
};

/// Sidecar listening on a local TCP port.
class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const std::string& host, int port, int timeout_ms) : timeout_ms_(timeout_ms) {
    detail::ignore_sigpipe();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      throw ExternalError("sidecar unreachable: cannot resolve " + host);
    for (auto* ai = res; ai; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw ExternalError("sidecar unreachable at " + host + ":" + std::to_string(port));
  }

  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  std::string request(const std::string& line) override {
    detail::write_all(fd_, line + "\n", true);
    return reader_.read_line(fd_, timeout_ms_);
  }

 private:
  int fd_ = -1;
  int timeout_ms_;
  detail::FdLineReader reader_;
};

struct SidecarInfo {
  std::string name;
  std::size_t dim = 0;
  std::string layers;
};

/// Encoder backend that forwards to a sidecar. Holds up to `in_flight`
/// connections; each carries one request at a time.
class ProtocolClientBackend final : public EncoderBackend {
 public:
  using ChannelFactory = std::function<std::unique_ptr<LineChannel>()>;

  ProtocolClientBackend(ChannelFactory factory, std::size_t in_flight = 4)
      : factory_(std::move(factory)), cap_(std::max<std::size_t>(in_flight, 1)) {
    open_ = 1;
    release(connect());  // first connection performs the handshake
  }

  TokenEncoding encode(const std::string& lang, const std::string& text) override {
    if (text.empty()) throw DataError("encode: empty text");
    auto ch = acquire();
    std::string reply;
    try {
      reply = ch->request(nlohmann::json{{"op", "encode"}, {"lang", lang}, {"text", text}}.dump());
    } catch (...) {
      drop();
      throw;
    }
    release(std::move(ch));
    const auto j = parse_reply(reply);
    auto enc = encoding_from_json(j, lang, text, id());
    if (enc.dim != info_.dim)
      throw ProtocolViolation("response dim " + std::to_string(enc.dim) + " != handshake dim " +
                              std::to_string(info_.dim));
    return require_valid(enc);
  }

  std::string id() const override { return "protocol:" + info_.name; }
  const SidecarInfo& info() const noexcept { return info_; }

 private:
  static nlohmann::json parse_reply(const std::string& reply) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolViolation(std::string("reply is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolViolation("reply is not an object");
    if (j.contains("error")) {
      throw ExternalError("sidecar error " + j["error"].dump() + ": " + j.value("msg", std::string{}));
    }
    return j;
  }

  std::unique_ptr<LineChannel> connect() {
    auto ch = factory_();
    const auto j = parse_reply(ch->request(R"({"op":"hello"})"));
    SidecarInfo info;
    try {
      info.name = j.at("name").get<std::string>();
      info.dim = j.at("dim").get<std::size_t>();
      info.layers = j.value("layers", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolViolation(std::string("bad hello reply: ") + e.what());
    }
    if (info.dim == 0) throw ProtocolViolation("hello advertised dim 0");
    std::lock_guard lock(mu_);
    if (info_.dim == 0) {
      info_ = info;
    } else if (info.dim != info_.dim) {
      throw ProtocolViolation("sidecar connections disagree on dim");
    }
    return ch;
  }

  std::unique_ptr<LineChannel> acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !idle_.empty() || open_ < cap_; });
    if (!idle_.empty()) {
      auto ch = std::move(idle_.back());
      idle_.pop_back();
      return ch;
    }
    ++open_;
    lock.unlock();
    try {
      return connect();
    } catch (...) {
      drop();
      throw;
    }
  }

  void release(std::unique_ptr<LineChannel> ch) {
    {
      std::lock_guard lock(mu_);
      idle_.push_back(std::move(ch));
    }
    cv_.notify_one();
  }

  /// Forget a broken connection.
  void drop() {
    {
      std::lock_guard lock(mu_);
      --open_;
    }
    cv_.notify_one();
  }

  ChannelFactory factory_;
  std::size_t cap_;
  std::size_t open_ = 0;
  SidecarInfo info_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<LineChannel>> idle_;
};

}  // namespace xlsim
