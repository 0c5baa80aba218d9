#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include "hiertraj/error.hpp"
#include "hiertraj/protocol.hpp"

namespace hiertraj {

namespace {

struct Fd {
  int fd = -1;
  ~Fd() { close(); }
  void close() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

// Trims a trailing CR and surrounding blanks.
std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool is_end_marker(std::string_view line) {
  line = trim(line);
  return line == std::string(kLeft) + "END" + std::string(kRight) || line == "<END>";
}

std::string run_once(const std::string& command, const std::string& prompt, double timeout_s) {
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw Error(ErrorCode::BackendUnavailable, std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::BackendUnavailable, std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int f : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(f);
    throw Error(ErrorCode::BackendUnavailable, std::strerror(errno));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int f : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(f);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  Fd to_child{in_pipe[1]};
  Fd from_child{out_pipe[0]};
  fcntl(to_child.fd, F_SETFL, O_NONBLOCK);

  const std::string request = prompt + "\n" + std::string(kLeft) + "END" + std::string(kRight) + "\n";
  size_t written = 0;
  std::string reply;
  bool ended = false, eof = false;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);

  auto reap = [&](bool kill_child) {
    if (kill_child) ::kill(pid, SIGKILL);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    return status;
  };

  while (!ended && !eof) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      reap(true);
      throw Error(ErrorCode::Timeout, "backend did not answer within " + std::to_string(timeout_s) + " s");
    }
    pollfd fds[2] = {{from_child.fd, POLLIN, 0}, {to_child.fd, POLLOUT, 0}};
    const nfds_t n = to_child.fd >= 0 ? 2 : 1;
    const int rc = poll(fds, n, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      reap(true);
      throw Error(ErrorCode::BackendUnavailable, std::strerror(errno));
    }
    if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(to_child.fd, request.data() + written, request.size() - written);
      if (w > 0) written += static_cast<size_t>(w);
      if (w < 0 && errno != EAGAIN && errno != EINTR) written = request.size();  // child stopped reading
      if (written >= request.size()) to_child.close();
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      const ssize_t r = ::read(from_child.fd, buf, sizeof buf);
      if (r > 0) {
        const size_t old = reply.size();
        reply.append(buf, static_cast<size_t>(r));
        // Look for a complete end-marker line in the new data.
        size_t line_start = reply.rfind('\n', old == 0 ? 0 : old - 1);
        line_start = line_start == std::string::npos ? 0 : line_start + 1;
        for (size_t nl; (nl = reply.find('\n', line_start)) != std::string::npos; line_start = nl + 1) {
          if (is_end_marker(std::string_view(reply).substr(line_start, nl - line_start))) {
            reply.resize(line_start);
            ended = true;
            break;
          }
        }
      } else if (r == 0) {
        eof = true;
      } else if (errno != EINTR && errno != EAGAIN) {
        eof = true;
      }
    }
  }
  if (!ended) {
    // A final marker without a newline still counts.
    const size_t nl = reply.rfind('\n');
    const size_t start = nl == std::string::npos ? 0 : nl + 1;
    if (is_end_marker(std::string_view(reply).substr(start))) {
      reply.resize(start);
      ended = true;
    }
  }
  from_child.close();
  to_child.close();
  const int status = reap(ended);
  if (!ended) {
    const bool bad_exit = !WIFEXITED(status) || WEXITSTATUS(status) != 0;
    if (reply.empty() || bad_exit) {
      throw Error(ErrorCode::BackendUnavailable,
                  "backend exited" + (WIFEXITED(status) ? " with status " + std::to_string(WEXITSTATUS(status))
                                                        : std::string(" on a signal")) +
                      " before answering");
    }
  }
  return reply;
}

}  // namespace

Transport make_subprocess_transport(const std::string& command) {
  if (command.empty()) throw Error(ErrorCode::InvalidArgument, "empty backend command");
  return [command](const std::string& prompt, double timeout_s) { return run_once(command, prompt, timeout_s); };
}

}  // namespace hiertraj
