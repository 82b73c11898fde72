#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>

// Per-test scratch directories under the system temp root, removed on scope
// exit so repeated test runs do not accumulate files.

namespace testsupport {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto ticks = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("maskaudit_test_" + std::to_string(ticks) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testsupport
