#include <spock/error.hpp>
#include <spock/process.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace spock {

ProcessResult run_shell(const std::string& command, bool capture, const std::filesystem::path& cwd) {
    int fds[2] = {-1, -1};
    if (capture && ::pipe(fds) != 0) throw Error(ErrorCode::engine, "pipe failed");

    std::fflush(nullptr);
    pid_t pid = ::fork();
    if (pid < 0) {
        if (capture) {
            ::close(fds[0]);
            ::close(fds[1]);
        }
        throw Error(ErrorCode::engine, std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        if (capture) {
            ::dup2(fds[1], STDOUT_FILENO);
            ::dup2(fds[1], STDERR_FILENO);
            ::close(fds[0]);
            ::close(fds[1]);
        }
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) ::_exit(127);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ProcessResult result;
    if (capture) {
        ::close(fds[1]);
        char buf[4096];
        for (;;) {
            ssize_t n = ::read(fds[0], buf, sizeof buf);
            if (n > 0) result.output.append(buf, static_cast<std::size_t>(n));
            else if (n == 0 || errno != EINTR) break;
        }
        ::close(fds[0]);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error(ErrorCode::engine, "waitpid failed");
    }
    if (WIFEXITED(status)) result.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_status = 128 + WTERMSIG(status);
    else result.exit_status = 1;
    return result;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += "'";
    return out;
}

std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        auto open = tmpl.find('{', pos);
        if (open == std::string::npos) break;
        auto close = tmpl.find('}', open);
        if (close == std::string::npos) break;
        auto it = values.find(tmpl.substr(open + 1, close - open - 1));
        if (it == values.end()) {
            out.append(tmpl, pos, close + 1 - pos);
        } else {
            out.append(tmpl, pos, open - pos);
            out += shell_quote(it->second);
        }
        pos = close + 1;
    }
    out.append(tmpl, pos, std::string::npos);
    return out;
}

} // namespace spock
