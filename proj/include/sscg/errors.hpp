#pragma once

#include <stdexcept>
#include <string>

namespace sscg {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct NotSymmetric : std::runtime_error {
    explicit NotSymmetric(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularRow : std::runtime_error {
    explicit SingularRow(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct FetchError : std::runtime_error {
    explicit FetchError(const std::string& what) : std::runtime_error(what) {}
};

struct CorruptDownload : std::runtime_error {
    explicit CorruptDownload(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sscg
