#pragma once

#include <cstdarg>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridident {

// Error taxonomy maps onto CLI exit codes: config 2, numeric 3, io 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::string format_str(const char* fmt, ...);

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Verbosity comes from the GRIDIDENT_LOG env var (error|warn|info|debug).
LogLevel log_level();
void set_log_level(LogLevel lvl);
void log_msg(LogLevel lvl, const char* fmt, ...);

#define GI_LOG_ERROR(...) ::gridident::log_msg(::gridident::LogLevel::error, __VA_ARGS__)
#define GI_LOG_WARN(...) ::gridident::log_msg(::gridident::LogLevel::warn, __VA_ARGS__)
#define GI_LOG_INFO(...) ::gridident::log_msg(::gridident::LogLevel::info, __VA_ARGS__)
#define GI_LOG_DEBUG(...) ::gridident::log_msg(::gridident::LogLevel::debug, __VA_ARGS__)

// FNV-1a, used for stream-seed derivation and topology/parameter checksums.
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull);

uint64_t splitmix64(uint64_t& state);

// Deterministic across platforms; the std distributions are not.
class Rng {
  public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    // in [0, 1)
    double next_double();
    double uniform(double lo, double hi);
    // Box-Muller, two uniform draws per call
    double normal(double mean = 0.0, double stddev = 1.0);
    // in [0, n)
    uint64_t next_below(uint64_t n);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t s_[4];
};

// Stream seed = f(master, name); one master seed reproduces the whole pipeline.
uint64_t derive_seed(uint64_t master, const std::string& stream);
uint64_t derive_seed(uint64_t master, const std::string& stream, uint64_t index);

}  // namespace gridident
