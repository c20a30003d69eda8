#pragma once

// Plain-text interchange for matrices and vectors.
//
//   matrix:  "m n" then m lines of n space-separated values
//   vector:  "m"   then m lines of one value
//
// Values are written in shortest round-trip decimal form, so a write/read
// cycle reproduces every double bit-for-bit.

#include "rkgs/error.hpp"
#include "rkgs/linalg.hpp"

#include <charconv>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace rkgs::io {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace detail {

class LineReader {
public:
    LineReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

    /// Next non-empty line; throws on EOF.
    std::string_view next(std::string_view expecting) {
        while (std::getline(in_, line_)) {
            ++lineno_;
            if (!line_.empty() && line_.back() == '\r') line_.pop_back();
            if (line_.find_first_not_of(" \t") != std::string::npos) return line_;
        }
        fail("unexpected end of file, expected " + std::string(expecting));
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(std::string(source_) + ":" + std::to_string(lineno_) + ": " + msg);
    }

    template <class T>
    std::vector<T> parse_fields(std::string_view line, std::size_t expected, std::string_view what) {
        std::vector<T> out;
        out.reserve(expected);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (true) {
            while (p != end && (*p == ' ' || *p == '\t')) ++p;
            if (p == end) break;
            T v{};
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{} || (res.ptr != end && *res.ptr != ' ' && *res.ptr != '\t')) {
                const char* stop = p;
                while (stop != end && *stop != ' ' && *stop != '\t') ++stop;
                fail("invalid " + std::string(what) + " '" + std::string(p, stop) + "'");
            }
            out.push_back(v);
            p = res.ptr;
        }
        if (out.size() != expected) {
            fail("expected " + std::to_string(expected) + " " + std::string(what) + " value(s), found " +
                 std::to_string(out.size()));
        }
        return out;
    }

private:
    std::istream& in_;
    std::string_view source_;
    std::string line_;
    std::size_t lineno_ = 0;
};

} // namespace detail

inline void write_matrix(std::ostream& out, const DenseMatrix& X) {
    out << X.rows() << ' ' << X.cols() << '\n';
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const auto r = X.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << ' ';
            out << format_double(r[j]);
        }
        out << '\n';
    }
}

inline void write_vector(std::ostream& out, std::span<const double> v) {
    out << v.size() << '\n';
    for (double x : v) out << format_double(x) << '\n';
}

inline DenseMatrix read_matrix(std::istream& in, std::string_view source = "<matrix>") {
    detail::LineReader reader(in, source);
    const auto dims = reader.parse_fields<std::size_t>(reader.next("header 'm n'"), 2, "dimension");
    if (dims[0] == 0 || dims[1] == 0) reader.fail("matrix dimensions must be positive");
    std::vector<double> data;
    data.reserve(dims[0] * dims[1]);
    for (std::size_t i = 0; i < dims[0]; ++i) {
        const auto row = reader.parse_fields<double>(reader.next("matrix row"), dims[1], "matrix entry");
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(dims[0], dims[1], std::move(data));
}

inline Vector read_vector(std::istream& in, std::string_view source = "<vector>") {
    detail::LineReader reader(in, source);
    const auto len = reader.parse_fields<std::size_t>(reader.next("header 'm'"), 1, "length")[0];
    Vector v;
    v.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        v.push_back(reader.parse_fields<double>(reader.next("vector entry"), 1, "vector entry")[0]);
    }
    return v;
}

} // namespace rkgs::io
