#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace screenorder::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTaskFailure = 1;
inline constexpr int kExitUsage = 2;

/// Process-level inputs, injectable for tests.
struct Environment {
    std::function<std::optional<std::string>(std::string_view)> getenv;
    /// Written to the first line of agent transcripts only.
    std::function<std::string()> timestamp;
};

Environment process_environment();

/// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env);

} // namespace screenorder::cli
