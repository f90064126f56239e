#pragma once

#include "sqa/common.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace sqa::detail {

// Host byte order; every supported target is little-endian.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    void put_bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), n); }

    void put_string(const std::string& s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }

    bool ok() const { return static_cast<bool>(out_); }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        T value{};
        get_bytes(&value, sizeof(T));
        return value;
    }

    void get_bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(what_ + ": truncated file");
    }

    std::string get_string(std::size_t max_len = 1u << 30) {
        const auto n = get<std::uint32_t>();
        if (n > max_len) throw FormatError(what_ + ": string length out of range");
        std::string s(n, '\0');
        get_bytes(s.data(), n);
        return s;
    }

    /// Element count guard against corrupted headers.
    std::uint64_t get_count(std::uint64_t limit) {
        const auto n = get<std::uint64_t>();
        if (n > limit) throw FormatError(what_ + ": count out of range");
        return n;
    }

    const std::string& what() const { return what_; }

private:
    std::istream& in_;
    std::string what_;
};

}  // namespace sqa::detail
