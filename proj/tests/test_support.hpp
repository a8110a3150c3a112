#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "noisedetect/rng.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("noisedetect_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(static_cast<unsigned long>(::getpid())));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void spit(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Random word of lowercase letters, length in [1, 10].
inline std::string random_word(noisedetect::SplitMix64& rng) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng.next_below(10));
    std::string word(len, 'a');
    for (char& c : word) c = static_cast<char>('a' + rng.next_below(26));
    return word;
}

/// Random document of `words` space-separated words.
inline std::string random_text(noisedetect::SplitMix64& rng, std::size_t words) {
    std::string text;
    for (std::size_t i = 0; i < words; ++i) {
        if (i > 0) text += ' ';
        text += random_word(rng);
    }
    return text;
}

} // namespace test_support
