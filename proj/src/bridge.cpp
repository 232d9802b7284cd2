#include "advdo/predictors.hpp"

#include <json.hpp>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

namespace advdo::predictors {

using nlohmann::json;

namespace {

json paths_json(const std::vector<Path>& ps) {
  json a = json::array();
  for (const auto& p : ps) {
    json row = json::array();
    for (const auto& v : p) row.push_back({v.x(), v.y()});
    a.push_back(std::move(row));
  }
  return a;
}

std::vector<Path> paths_from(const json& j, std::size_t n, std::size_t len, const std::string& at) {
  if (!j.is_array() || j.size() != n) throw BridgeError(at + ": expected " + std::to_string(n) + " agents");
  std::vector<Path> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != len)
      throw BridgeError(at + "/" + std::to_string(i) + ": expected " + std::to_string(len) + " points");
    for (std::size_t t = 0; t < len; ++t) {
      const auto& v = row[t];
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw BridgeError(at + "/" + std::to_string(i) + "/" + std::to_string(t) + ": expected [x, y]");
      out[i].emplace_back(v[0].get<double>(), v[1].get<double>());
    }
  }
  return out;
}

}  // namespace

struct ExternalModel::Impl {
  pid_t pid = -1;
  int fd = -1;
  std::string buffer;
  std::mutex mu;
  bool grad_supported = true;

  void send_line(const std::string& line) {
    std::string msg = line + "\n";
    std::size_t off = 0;
    while (off < msg.size()) {
      const ssize_t w = ::send(fd, msg.data() + off, msg.size() - off, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("bridge: write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BridgeError("bridge: no reply within timeout");
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(left.count()));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("bridge: poll failed: ") + std::strerror(errno));
      }
      if (r == 0) throw BridgeError("bridge: no reply within timeout");
      char chunk[4096];
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("bridge: read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw BridgeError("bridge: child closed the stream");
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  json request(const json& req, std::chrono::milliseconds timeout) {
    send_line(req.dump());
    const std::string line = read_line(timeout);
    try {
      return json::parse(line);
    } catch (const json::parse_error&) {
      throw BridgeError("bridge: malformed reply: " + line.substr(0, 200));
    }
  }
};

ExternalModel::ExternalModel(std::string command) : ExternalModel(std::move(command), Options{}) {}

ExternalModel::ExternalModel(std::string command, Options opts)
    : impl_(std::make_unique<Impl>()), opts_(opts) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw BridgeError(std::string("bridge: socketpair failed: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw BridgeError(std::string("bridge: fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  impl_->pid = pid;
  impl_->fd = sv[0];
}

ExternalModel::~ExternalModel() {
  if (!impl_ || impl_->pid < 0) return;
  try {
    impl_->send_line(R"({"cmd":"shutdown"})");
  } catch (const BridgeError&) {
  }
  ::shutdown(impl_->fd, SHUT_WR);
  int status = 0;
  for (int i = 0; i < 50; ++i) {
    if (::waitpid(impl_->pid, &status, WNOHANG) == impl_->pid) {
      impl_->pid = -1;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  if (impl_->pid > 0) {
    ::kill(impl_->pid, SIGKILL);
    ::waitpid(impl_->pid, &status, 0);
  }
  ::close(impl_->fd);
}

bool ExternalModel::has_exact_gradient() const {
  std::lock_guard lk(impl_->mu);
  return impl_->grad_supported;
}

Prediction ExternalModel::predict(const Scene& scene) const {
  scene.validate();
  json req{{"cmd", "predict"}, {"dt", scene.dt}, {"horizon", scene.horizon},
           {"X", paths_json(scene.histories)}};
  json rep;
  {
    std::lock_guard lk(impl_->mu);
    rep = impl_->request(req, opts_.timeout);
  }
  if (!rep.is_object()) throw BridgeError("bridge: reply is not an object");
  if (rep.contains("error")) throw BridgeError("bridge: child error: " + rep["error"].dump());
  if (!rep.contains("modes") || !rep["modes"].is_array() || rep["modes"].empty())
    throw BridgeError("bridge: /modes missing or empty");
  if (!rep.contains("probs") || !rep["probs"].is_array() || rep["probs"].size() != rep["modes"].size())
    throw BridgeError("bridge: /probs missing or its mode count differs from /modes");
  Prediction p;
  const std::size_t n = scene.agents();
  for (std::size_t k = 0; k < rep["modes"].size(); ++k) {
    p.modes.push_back(paths_from(rep["modes"][k], n, scene.horizon, "/modes/" + std::to_string(k)));
    const auto& pk = rep["probs"][k];
    if (!pk.is_array() || pk.size() != n) throw BridgeError("bridge: /probs/" + std::to_string(k) + ": bad shape");
    std::vector<double> probs;
    for (const auto& v : pk) {
      if (!v.is_number()) throw BridgeError("bridge: /probs/" + std::to_string(k) + ": expected numbers");
      probs.push_back(v.get<double>());
    }
    p.probs.push_back(std::move(probs));
  }
  try {
    p.validate(n, scene.horizon);
  } catch (const InvalidInput& e) {
    throw BridgeError(std::string("bridge: ") + e.what());
  }
  return p;
}

HistoryGrad ExternalModel::pullback(const Scene& scene, const PredictionCotangent& dY) const {
  scene.validate();
  bool supported;
  {
    std::lock_guard lk(impl_->mu);
    supported = impl_->grad_supported;
  }
  if (supported) {
    json dy = json::array();
    for (const auto& m : dY) dy.push_back(paths_json(m));
    json req{{"cmd", "grad"}, {"dt", scene.dt}, {"horizon", scene.horizon},
             {"X", paths_json(scene.histories)}, {"dY", dy}};
    json rep;
    {
      std::lock_guard lk(impl_->mu);
      rep = impl_->request(req, opts_.timeout);
    }
    if (!rep.is_object()) throw BridgeError("bridge: reply is not an object");
    if (rep.contains("dX")) return paths_from(rep["dX"], scene.agents(), scene.history_length(), "/dX");
    if (!rep.contains("error")) throw BridgeError("bridge: /dX missing");
    std::lock_guard lk(impl_->mu);
    impl_->grad_supported = false;
  }
  if (!opts_.finite_difference)
    throw CapabilityError("external model has no gradient support and finite differences are disabled");
  return fd_pullback(*this, scene, dY, opts_.fd_step);
}

}  // namespace advdo::predictors
