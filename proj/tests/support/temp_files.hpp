#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace testsupport {

inline std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() /
               ("graphqa_tests_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    static std::atomic<int> counter{0};
    auto path = temp_dir() / (std::to_string(counter.fetch_add(1)) + "_" + name);
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testsupport
