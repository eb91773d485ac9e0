#pragma once

#include <filesystem>
#include <string>

namespace deepfa {

struct ProcessResult {
    int exit_code = -1;       // -1 when the process did not exit normally
    std::string diagnostics;  // captured stderr
};

// Runs `command_line` through /bin/sh, blocking. stdout is discarded and stderr
// captured via `scratch_dir`.
ProcessResult run_shell(const std::string& command_line, const std::filesystem::path& scratch_dir);

// Single-quotes `arg` for /bin/sh.
std::string shell_quote(const std::string& arg);

}  // namespace deepfa
