#pragma once

// Minimal child-process control for tests that drive the CLI binary.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chatids::testing {

class Child {
public:
    explicit Child(const std::vector<std::string>& argv) {
        int out[2];
        if (::pipe(out) != 0) throw std::runtime_error("pipe failed");
        pid_ = ::fork();
        if (pid_ < 0) throw std::runtime_error("fork failed");
        if (pid_ == 0) {
            ::dup2(out[1], STDOUT_FILENO);
            ::close(out[0]);
            ::close(out[1]);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            ::execv(args[0], args.data());
            ::_exit(127);
        }
        ::close(out[1]);
        out_fd_ = out[0];
    }
    ~Child() {
        if (pid_ > 0 && !status_) {
            ::kill(pid_, SIGKILL);
            wait();
        }
        if (out_fd_ >= 0) ::close(out_fd_);
    }
    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;

    /// Reads stdout until `needle` shows up, EOF or the deadline. Returns everything read.
    std::string read_until(const std::string& needle, std::chrono::milliseconds limit) {
        auto deadline = std::chrono::steady_clock::now() + limit;
        while (out_.find(needle) == std::string::npos) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) break;
            pollfd p{out_fd_, POLLIN, 0};
            if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) break;
            char buf[4096];
            auto n = ::read(out_fd_, buf, sizeof buf);
            if (n <= 0) break;
            out_.append(buf, static_cast<std::size_t>(n));
        }
        return out_;
    }
    std::string read_all(std::chrono::milliseconds limit) { return read_until(std::string(1, '\0'), limit); }

    void kill(int sig = SIGKILL) { ::kill(pid_, sig); }

    /// Exit code, or 128 + signal.
    int wait() {
        if (status_) return *status_;
        int st = 0;
        ::waitpid(pid_, &st, 0);
        status_ = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
        return *status_;
    }

private:
    pid_t pid_ = -1;
    int out_fd_ = -1;
    std::string out_;
    std::optional<int> status_;
};

}  // namespace chatids::testing
