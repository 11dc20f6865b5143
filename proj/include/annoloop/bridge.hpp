#pragma once

#include <chrono>
#include <csignal>
#include <cstring>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "annoloop/canonical.hpp"
#include "annoloop/detector.hpp"
#include "annoloop/errors.hpp"

namespace annoloop {

/// Detector bridge protocol, version 1.
///
/// UTF-8 NDJSON, one message per line, strict request/response alternation.
/// Every message carries its kind in "type".
///
///   host -> adapter                         adapter -> host
///   hello{protocol_version}                 hello_ack{descriptor}
///                                           (a version mismatch is answered with error{})
///   train{batch_index, images:[{image_id,   train_ack{batch_index}
///         width, height, objects:[{class_label, box}]}]}
///   predict{batch_index, images:[{image_id, predictions{batch_index, detections:[
///         width, height}]}                    {image_id, class_label, box, confidence}]}
///   reset{}                                 reset_ack{}
///   shutdown{}                              shutdown_ack{} (or end of stream)
///   any request                             error{code, message}
///
/// Boxes are [xmin, ymin, xmax, ymax] in pixels. Image pixels never cross the
/// wire; the adapter resolves image ids against its `--images` directory.
namespace protocol {
inline constexpr int kVersion = 1;
}

/// A line-oriented, bidirectional byte stream to an adapter.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Throws TransportError on end of stream or when `timeout` elapses.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

class FdLineReader {
 public:
  std::string read_line(int fd, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TransportError("adapter did not answer within the deadline");
      pollfd pfd{fd, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[4096];
      const auto n = ::read(fd, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw TransportError(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError("adapter closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buffer_;
};

inline void write_all(int fd, const std::string& data, bool socket) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                          : ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("write to adapter failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace detail

/// Adapter running as a child process; talks over its stdin/stdout. The
/// command is run through /bin/sh. SIGPIPE is ignored process-wide so a dead
/// adapter surfaces as TransportError instead of killing the host.
class ChildProcessTransport final : public LineTransport {
 public:
  explicit ChildProcessTransport(const std::string& command) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw TransportError("pipe() failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw TransportError("pipe() failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw TransportError("fork() failed");
    if (pid_ == 0) {
      ::setpgid(0, 0);  // own process group, so the whole adapter tree can be killed
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_ = to_child[1];
    out_ = from_child[0];
    ::fcntl(in_, F_SETFD, FD_CLOEXEC);
    ::fcntl(out_, F_SETFD, FD_CLOEXEC);
  }

  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  ~ChildProcessTransport() override {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      // Give the adapter a moment to exit on its own after stdin closes.
      bool reaped = false;
      for (int i = 0; i < 50 && !reaped; ++i) {
        reaped = ::waitpid(pid_, nullptr, WNOHANG) == pid_;
        if (!reaped) ::usleep(20000);
      }
      // Also takes down anything the shell left behind.
      ::kill(-pid_, SIGKILL);
      if (!reaped) ::waitpid(pid_, nullptr, 0);
    }
  }

  void write_line(const std::string& line) override { detail::write_all(in_, line + "\n", false); }
  std::string read_line(std::chrono::milliseconds timeout) override { return reader_.read_line(out_, timeout); }

  pid_t pid() const noexcept { return pid_; }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  detail::FdLineReader reader_;
};

/// Adapter listening on a TCP address "host:port".
class TcpTransport final : public LineTransport {
 public:
  explicit TcpTransport(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw TransportError("expected host:port, got '" + address + "'");
    const auto host = address.substr(0, colon);
    const auto port = address.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) {
      throw TransportError("cannot resolve '" + address + "'");
    }
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw TransportError("cannot connect to '" + address + "'");
  }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(const std::string& line) override { detail::write_all(fd_, line + "\n", true); }
  std::string read_line(std::chrono::milliseconds timeout) override { return reader_.read_line(fd_, timeout); }

 private:
  int fd_ = -1;
  detail::FdLineReader reader_;
};

struct ValidatedPredictions {
  std::vector<std::vector<Detection>> per_image;  // aligned with the request's images
  std::size_t clamped_boxes = 0;
  std::size_t dropped_degenerate = 0;
  std::size_t dropped_unknown_class = 0;
  std::size_t clamped_confidences = 0;

  std::size_t warnings() const noexcept {
    return clamped_boxes + dropped_degenerate + dropped_unknown_class + clamped_confidences;
  }
};

/// Checks a `predictions` message against the outstanding request. Boxes are
/// clamped to the image (degenerate ones dropped), confidences clamped to
/// [0,1], detections with labels outside `vocabulary` dropped (an empty
/// vocabulary accepts every label). Unknown image ids and a mismatched
/// batch_index are ProtocolErrors.
inline ValidatedPredictions validate_predictions(const nlohmann::json& msg, std::size_t batch_index,
                                                 std::span<const ImageRecord> images,
                                                 const std::vector<std::string>& vocabulary = {}) {
  ValidatedPredictions out;
  out.per_image.resize(images.size());
  try {
    if (msg.at("type").get<std::string>() != "predictions") throw ProtocolError("expected a predictions message");
    if (msg.at("batch_index").get<std::size_t>() != batch_index) {
      throw ProtocolError("predictions for batch " + msg.at("batch_index").dump() + ", expected " +
                          std::to_string(batch_index));
    }
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < images.size(); ++i) slot.emplace(images[i].image_id, i);
    const std::set<std::string> known(vocabulary.begin(), vocabulary.end());

    for (const auto& d : msg.at("detections")) {
      const auto id = d.at("image_id").get<std::string>();
      const auto it = slot.find(id);
      if (it == slot.end()) throw ProtocolError("prediction for unknown image_id '" + id + "'");
      const auto& img = images[it->second];
      auto label = d.at("class_label").get<std::string>();
      if (!known.empty() && !known.contains(label)) {
        ++out.dropped_unknown_class;
        continue;
      }
      double conf = d.at("confidence").get<double>();
      if (!(conf >= 0.0 && conf <= 1.0)) {
        conf = std::isnan(conf) ? 0.0 : std::clamp(conf, 0.0, 1.0);
        ++out.clamped_confidences;
      }
      const auto& b = d.at("box");
      if (!b.is_array() || b.size() != 4) throw ProtocolError("box must be [xmin, ymin, xmax, ymax]");
      const double x0 = b[0].get<double>(), y0 = b[1].get<double>(), x1 = b[2].get<double>(), y1 = b[3].get<double>();
      try {
        const BoundingBox raw(x0, y0, x1, y1);
        const auto clamped = clamp_to_image(raw, img.width, img.height);
        if (!(clamped == raw)) ++out.clamped_boxes;
        out.per_image[it->second].push_back({id, std::move(label), clamped, conf});
      } catch (const DegenerateBox&) {
        ++out.dropped_degenerate;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed predictions message: ") + e.what());
  }
  return out;
}

struct BridgeOptions {
  std::chrono::milliseconds request_timeout{std::chrono::seconds(300)};
  std::vector<std::string> vocabulary;  // accepted class labels; empty accepts all
};

/// DetectorSession backed by an external adapter.
class BridgeSession final : public DetectorSession {
 public:
  /// Performs the hello handshake; throws HandshakeError on a version
  /// mismatch or a malformed hello_ack.
  BridgeSession(std::unique_ptr<LineTransport> transport, BridgeOptions options = {})
      : transport_(std::move(transport)), options_(std::move(options)) {
    nlohmann::json reply;
    try {
      reply = request({{"type", "hello"}, {"protocol_version", protocol::kVersion}});
    } catch (const TransportError&) {
      throw;
    } catch (const DetectorError& e) {
      throw HandshakeError(std::string("handshake failed: ") + e.what());
    }
    if (reply.value("type", "") != "hello_ack" || !reply.contains("descriptor") || !reply["descriptor"].is_string()) {
      throw HandshakeError("malformed hello_ack: " + reply.dump());
    }
    if (reply.contains("protocol_version") && reply["protocol_version"] != protocol::kVersion) {
      throw HandshakeError("adapter speaks protocol version " + reply["protocol_version"].dump());
    }
    descriptor_ = reply["descriptor"].get<std::string>();
  }

  /// Launches `command` (plus `--images <dir>` when given) as a child process.
  static std::unique_ptr<BridgeSession> launch(const std::string& command, const std::string& images_dir = {},
                                               BridgeOptions options = {}) {
    std::string cmd = command;
    if (!images_dir.empty()) cmd += " --images '" + images_dir + "'";
    return std::make_unique<BridgeSession>(std::make_unique<ChildProcessTransport>(cmd), std::move(options));
  }

  static std::unique_ptr<BridgeSession> connect(const std::string& address, BridgeOptions options = {}) {
    return std::make_unique<BridgeSession>(std::make_unique<TcpTransport>(address), std::move(options));
  }

  BridgeSession(const BridgeSession&) = delete;
  BridgeSession& operator=(const BridgeSession&) = delete;

  ~BridgeSession() override {
    try {
      transport_->write_line(nlohmann::json{{"type", "shutdown"}}.dump());
      transport_->read_line(std::chrono::milliseconds(1000));
    } catch (...) {
      // Adapter already gone or silent; the transport cleans up.
    }
  }

  void begin_batch(std::size_t index) override { batch_index_ = index; }

  void train(std::span<const ImageRecord> annotated) override {
    auto images = nlohmann::json::array();
    for (const auto& img : annotated) {
      auto objs = nlohmann::json::array();
      for (const auto& o : img.objects) {
        objs.push_back({{"class_label", o.class_label}, {"box", canonical::box_to_json(o.box)}});
      }
      images.push_back({{"image_id", img.image_id}, {"width", img.width}, {"height", img.height}, {"objects", objs}});
    }
    const auto reply = request({{"type", "train"}, {"batch_index", batch_index_}, {"images", std::move(images)}});
    expect(reply, "train_ack");
    if (reply.value("batch_index", static_cast<std::size_t>(-1)) != batch_index_) {
      throw ProtocolError("train_ack for the wrong batch: " + reply.dump());
    }
  }

  std::vector<std::vector<Detection>> predict(std::span<const ImageRecord> images) override {
    auto req_images = nlohmann::json::array();
    for (const auto& img : images) {
      req_images.push_back({{"image_id", img.image_id}, {"width", img.width}, {"height", img.height}});
    }
    const auto reply =
        request({{"type", "predict"}, {"batch_index", batch_index_}, {"images", std::move(req_images)}});
    auto v = validate_predictions(reply, batch_index_, images, options_.vocabulary);
    warnings_ += v.warnings();
    return std::move(v.per_image);
  }

  void reset() override { expect(request({{"type", "reset"}}), "reset_ack"); }

  std::string descriptor() const override { return descriptor_; }

  /// Total clamp/drop warnings from validated predictions.
  std::size_t warnings() const noexcept { return warnings_; }

 private:
  nlohmann::json request(const nlohmann::json& msg) {
    transport_->write_line(msg.dump());
    const auto line = transport_->read_line(options_.request_timeout);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("adapter sent a non-JSON line: " + line.substr(0, 200));
    }
    if (!reply.is_object() || !reply.contains("type")) throw ProtocolError("reply without type: " + line.substr(0, 200));
    if (reply["type"] == "error") {
      throw DetectorError("adapter error " + reply.value("code", std::string("?")) + ": " +
                          reply.value("message", std::string()));
    }
    return reply;
  }

  static void expect(const nlohmann::json& reply, const char* type) {
    if (reply.value("type", "") != type) {
      throw ProtocolError(std::string("expected ") + type + ", got " + reply.dump().substr(0, 200));
    }
  }

  std::unique_ptr<LineTransport> transport_;
  BridgeOptions options_;
  std::string descriptor_;
  std::size_t batch_index_ = 0;
  std::size_t warnings_ = 0;
};

}  // namespace annoloop
