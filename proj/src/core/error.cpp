#include "fbent/error.hpp"

#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace fbent {
namespace {
std::mutex g_mutex;
WarningHandler g_handler;
std::set<std::string> g_seen; // the default sink prints each distinct message once
} // namespace

void set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(g_mutex);
    g_handler = std::move(handler);
}

void warn(std::string_view message)
{
    std::lock_guard lock(g_mutex);
    if (g_handler) {
        g_handler(message);
        return;
    }
    if (g_seen.emplace(message).second)
        std::cerr << "fbent warning: " << message << '\n';
}

} // namespace fbent
