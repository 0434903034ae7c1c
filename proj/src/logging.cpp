#include "labrbf/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <mutex>

namespace labrbf::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
    static std::once_flag once;
    static std::shared_ptr<spdlog::logger> instance;
    std::call_once(once, [] {
        instance = spdlog::stderr_color_mt("labkrr");
        instance->set_pattern("[%l] %v");
        instance->set_level(spdlog::level::warn);
        if (const char* env = std::getenv("LABKRR_LOG")) {
            instance->set_level(spdlog::level::from_str(env));
        }
    });
    return instance;
}

}  // namespace

void init_from_env() { logger(); }

void debug(std::string_view msg) { logger()->debug(msg); }
void info(std::string_view msg) { logger()->info(msg); }
void warn(std::string_view msg) { logger()->warn(msg); }

}  // namespace labrbf::log
