#include "deepfa/subprocess.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"

#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

extern char** environ;

namespace deepfa {

std::string shell_quote(const std::string& arg) {
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'')
            out += "'\\''";
        else
            out += c;
    }
    out += '\'';
    return out;
}

ProcessResult run_shell(const std::string& command_line, const std::filesystem::path& scratch_dir) {
    std::filesystem::create_directories(scratch_dir);
    const auto err_path = scratch_dir / "stderr.log";

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_path.c_str(),
                                     O_WRONLY | O_CREAT | O_TRUNC, 0644);

    std::string sh = "/bin/sh";
    std::string flag = "-c";
    std::string cmd = command_line;
    char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};

    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw ExtractorError("cannot spawn '" + command_line + "': " + std::strerror(rc));

    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw ExtractorError("waitpid failed for '" + command_line + "'");
    }
    ProcessResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (std::filesystem::exists(err_path)) result.diagnostics = csv::read_text(err_path);
    return result;
}

}  // namespace deepfa
