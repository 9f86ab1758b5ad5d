// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "poisonkit/error.hpp"

extern char** environ;

namespace poisonkit {

// A child running `/bin/sh -c command` with line-oriented pipes on its
// standard input and output. Standard error is inherited.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    static const bool sigpipe_ignored = [] {
      ::signal(SIGPIPE, SIG_IGN);
      return true;
    }();
    (void)sigpipe_ignored;

    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw Error(std::string("pipe: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", flag = "-c", cmd = command;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
    // Own process group, so terminate() also reaches grandchildren of the shell.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, argv, environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      throw Error("cannot spawn '" + command + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() { terminate(); }

  void write_line(std::string_view line) {
    std::string buf(line);
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      ssize_t n = ::write(to_child_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("write to generator failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Next newline-terminated line (without the newline); nullopt on EOF.
  // Throws ProtocolError on timeout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (eof_) return std::nullopt;
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ProtocolError("generator reply timed out");
      pollfd pfd{from_child_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[4096];
      ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("read from generator failed: ") + std::strerror(errno));
      }
      if (n == 0) {
        eof_ = true;
        if (!buffer_.empty()) throw ProtocolError("generator closed its output mid-line");
        continue;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close_input() {
    if (to_child_ >= 0) {
      ::close(to_child_);
      to_child_ = -1;
    }
  }

  // Closes the pipes, waits briefly for a clean exit, then kills the process
  // group.
  void terminate() {
    close_input();
    if (from_child_ >= 0) {
      ::close(from_child_);
      from_child_ = -1;
    }
    if (pid_ <= 0) return;
    bool exited = false;
    for (int i = 0; i < 50 && !exited; ++i) {
      exited = ::waitpid(pid_, nullptr, WNOHANG) == pid_;
      if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ::kill(-pid_, SIGKILL);
    if (!exited) ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace poisonkit
