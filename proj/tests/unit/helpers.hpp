#pragma once

#include "protobias/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>
#include <unistd.h>

namespace protobias::testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        static int counter = 0;
        m_path = std::filesystem::temp_directory_path() /
                 ("protobias-unit-" + std::to_string(::getpid()) + "-" + tag + "-" + std::to_string(counter++));
        std::filesystem::remove_all(m_path);
        std::filesystem::create_directories(m_path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(m_path, ec);
    }
    const std::filesystem::path &path() const { return m_path; }
    std::filesystem::path operator/(const std::string &s) const { return m_path / s; }

private:
    std::filesystem::path m_path;
};

template <class Fn>
ErrorCode error_of(Fn &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("expected a protobias::Error");
    return ErrorCode::InvalidArgument;
}

} // namespace protobias::testing

#define CHECK_ERROR(expr, code) CHECK(::protobias::testing::error_of([&] { (void)(expr); }) == ::protobias::ErrorCode::code)
