#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "reval/core.hpp"

namespace testutil {

inline std::filesystem::path fixture_dir() { return REVAL_FIXTURE_DIR; }
inline std::filesystem::path asset_dir() { return REVAL_ASSET_DIR; }

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("reval-test-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Captures warnings emitted through the library sink for one scope.
class WarningCapture {
public:
    WarningCapture() {
        previous_ = reval::set_warning_handler(
            [this](const std::string& msg) { messages_.push_back(msg); });
    }
    ~WarningCapture() { reval::set_warning_handler(previous_); }
    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(const std::string& needle) const {
        for (const auto& msg : messages_)
            if (msg.find(needle) != std::string::npos) return true;
        return false;
    }

private:
    reval::WarningHandler previous_;
    std::vector<std::string> messages_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

}  // namespace testutil
