#pragma once

#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridshock {

using Complex = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

/// Structural problem in an input document: bad syntax or a field that
/// cannot be interpreted. Carries the path of the offending field.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::string context, const std::string& message)
        : std::runtime_error(context.empty() ? message : context + ": " + message),
          context_(std::move(context)) {}

    const std::string& context() const { return context_; }

  private:
    std::string context_;
};

/// Semantic invariant violations. Collects every violation found, not
/// just the first.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

  private:
    static std::string join(const std::vector<std::string>& vs) {
        std::string out = "validation failed:";
        for (const auto& v : vs) {
            out += "\n  - ";
            out += v;
        }
        return out;
    }
    std::vector<std::string> violations_;
};

/// A bus is electrically unreachable from the slack.
class IslandedBusError : public std::runtime_error {
  public:
    explicit IslandedBusError(const std::string& message)
        : std::runtime_error("IslandedBus: " + message) {}
};

/// The base operating point of a study cannot be established.
class BaseCaseInfeasible : public std::runtime_error {
  public:
    explicit BaseCaseInfeasible(const std::string& message)
        : std::runtime_error("BaseCaseInfeasible: " + message) {}
};

/// A machine cannot be initialized at the requested operating point.
class InitInfeasible : public std::runtime_error {
  public:
    explicit InitInfeasible(const std::string& message)
        : std::runtime_error("InitInfeasible: " + message) {}
};

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

namespace detail {

inline LogLevel log_level_from_env() {
    const char* env = std::getenv("GRIDSHOCK_LOG");
    if (env == nullptr) return LogLevel::Warn;
    std::string_view v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
}

}  // namespace detail

/// Process-wide log threshold, taken from GRIDSHOCK_LOG at first use.
inline LogLevel& log_level() {
    static LogLevel level = detail::log_level_from_env();
    return level;
}

/// Logs to stderr; data outputs go to files only.
inline void log(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[gridshock:%s] %s\n", names[static_cast<int>(level)], message.c_str());
}

inline void log_error(const std::string& m) { log(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::Debug, m); }

/// FNV-1a, used for the config digests in run manifests.
inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(data)));
    return std::string(buf);
}

}  // namespace gridshock
