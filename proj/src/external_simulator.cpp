#include "simgap/external_simulator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include "json.hpp"

#include "simgap/error.hpp"

namespace simgap {

using nlohmann::json;

class ExternalSimulator::Process {
 public:
  explicit Process(const std::vector<std::string>& argv) {
    if (argv.empty()) throw InvalidArgument("external simulator: empty command");
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw SimulatorIoError(std::string("pipe failed: ") + std::strerror(errno));
    pid_ = fork();
    if (pid_ < 0)
      throw SimulatorIoError(std::string("fork failed: ") + std::strerror(errno));
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    // A dead child must surface as an IO error, not SIGPIPE.
    signal(SIGPIPE, SIG_IGN);
  }

  ~Process() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
      }
    }
  }

  void write_line(const std::string& line) {
    std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      ssize_t w = ::write(write_fd_, buf.data() + off, buf.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw SimulatorIoError("write to external simulator failed: " +
                                   std::string(std::strerror(errno)),
                               line);
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw SimulatorIoError("external simulator timed out after " +
                                   std::to_string(timeout.count()) + " ms",
                               pending_);
      pollfd pfd{read_fd_, POLLIN, 0};
      int rc = poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw SimulatorIoError("poll failed: " + std::string(std::strerror(errno)));
      }
      if (rc == 0) continue;
      char buf[4096];
      ssize_t r = ::read(read_fd_, buf, sizeof buf);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw SimulatorIoError("read failed: " + std::string(std::strerror(errno)));
      }
      if (r == 0)
        throw SimulatorIoError("external simulator closed its output", pending_);
      pending_.append(buf, static_cast<std::size_t>(r));
    }
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string pending_;
};

namespace {

json parse_reply(const std::string& line) {
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::exception&) {
    throw SimulatorIoError("malformed response from external simulator", line);
  }
  if (!reply.is_object())
    throw SimulatorIoError("response is not a JSON object", line);
  if (reply.contains("error")) {
    const std::string msg = reply["error"].is_string()
                                ? reply["error"].get<std::string>()
                                : reply["error"].dump();
    throw SimulatorIoError("external simulator reported error: " + msg, line);
  }
  return reply;
}

}  // namespace

ExternalSimulator::ExternalSimulator(SystemSpec spec, ExternalOptions options)
    : spec_(std::move(spec)), options_(std::move(options)) {
  spec_.validate();
  proc_ = std::make_unique<Process>(options_.command);
  const std::string line = request(json{{"cmd", "info"}}.dump());
  json info = parse_reply(line);
  if (!info.contains("n") || !info.contains("m") ||
      !info["n"].is_number_integer() || !info["m"].is_number_integer())
    throw SimulatorIoError("info response lacks integer n and m", line);
  if (info["n"].get<std::size_t>() != spec_.state_dim ||
      info["m"].get<std::size_t>() != spec_.input_dim)
    throw SimulatorIoError("external simulator dimensions do not match the "
                           "system specification",
                           line);
  crn_ = info.value("common_random_numbers", false);
}

ExternalSimulator::~ExternalSimulator() = default;

std::string ExternalSimulator::request(const std::string& line) {
  proc_->write_line(line);
  return proc_->read_line(options_.timeout);
}

Vec ExternalSimulator::step(std::span<const double> x,
                            std::span<const double> u, std::uint64_t seed) {
  json req = {{"cmd", "step"},
              {"x", std::vector<double>(x.begin(), x.end())},
              {"u", std::vector<double>(u.begin(), u.end())},
              {"tau", spec_.tau},
              {"seed", seed}};
  const std::string line = request(req.dump());
  json reply = parse_reply(line);
  if (!reply.contains("x_next") || !reply["x_next"].is_array())
    throw SimulatorIoError("step response lacks x_next", line);
  Vec out;
  for (const auto& v : reply["x_next"]) {
    if (!v.is_number()) throw SimulatorIoError("x_next is not numeric", line);
    out.push_back(v.get<double>());
  }
  if (out.size() != spec_.state_dim || !all_finite(out))
    throw SimulatorIoError("x_next has wrong size or non-finite entries", line);
  return out;
}

std::unique_ptr<Simulator> ExternalSimulator::clone() const {
  return std::make_unique<ExternalSimulator>(spec_, options_);
}

std::string ExternalSimulator::describe() const {
  std::string cmd;
  for (const auto& a : options_.command) cmd += (cmd.empty() ? "" : " ") + a;
  return "external(" + cmd + ")";
}

}  // namespace simgap
