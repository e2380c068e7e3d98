#pragma once

#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace genmix {

// Library-wide logger. Writes to stderr so stdout stays clean for JSON reports.
inline std::shared_ptr<spdlog::logger> logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto existing = spdlog::get("genmix");
        if (existing) return existing;
        auto created = spdlog::stderr_color_mt("genmix");
        created->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        return created;
    }();
    return instance;
}

}  // namespace genmix
