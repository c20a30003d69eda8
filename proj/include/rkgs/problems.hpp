#pragma once

#include "rkgs/error.hpp"
#include "rkgs/io.hpp"
#include "rkgs/linalg.hpp"
#include "rkgs/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace rkgs {

inline constexpr int kMaxGenerationAttempts = 5;

struct GenSpec {
    std::size_t m = 0;
    std::size_t n = 0;
    Regime regime = Regime::OverConsistent;
    std::uint64_t seed = 0;
    double noise_scale = 1.0; ///< norm scale of the inconsistent part r
};

struct TomoSpec {
    std::size_t grid_n = 20;   ///< N
    std::size_t oversample = 3; ///< d: unknowns = d N^2, measurements = N^2
    std::uint64_t seed = 0;
};

inline void validate(const GenSpec& spec) {
    if (spec.m == 0 || spec.n == 0) throw ConfigError("gen: m and n must be positive");
    const bool ok = (spec.regime == Regime::OverConsistent && spec.m >= spec.n) ||
                    (spec.regime == Regime::OverInconsistent && spec.m > spec.n) ||
                    (spec.regime == Regime::Underdetermined && spec.m < spec.n);
    if (!ok) {
        throw ConfigError("gen: " + std::to_string(spec.m) + "x" + std::to_string(spec.n) +
                          " is not a valid shape for the " + std::string(to_string(spec.regime)) + " regime");
    }
    if (!(spec.noise_scale >= 0.0) || !std::isfinite(spec.noise_scale))
        throw ConfigError("gen: noise scale must be a finite nonnegative number");
    if (spec.regime == Regime::OverInconsistent && spec.noise_scale == 0.0)
        throw ConfigError("gen: the over-inconsistent regime needs a positive noise scale");
}

namespace detail {

inline LinearSystem gaussian_attempt(const GenSpec& spec, std::uint64_t seed) {
    Prng rng(seed);
    std::vector<double> data(spec.m * spec.n);
    for (auto& v : data) v = gaussian(rng);
    DenseMatrix X(spec.m, spec.n, std::move(data));
    const Vector planted = gaussian_vector(rng, spec.n);
    Vector y = matvec(X, planted);

    LinearSystem sys;
    sys.regime = spec.regime;
    switch (spec.regime) {
    case Regime::OverConsistent:
        sys.reference = least_squares_ref(X, y);
        break;
    case Regime::OverInconsistent: {
        // r = s * (v - X (X^T X)^{-1} X^T v): the part of v orthogonal to range(X)
        const Vector v = gaussian_vector(rng, spec.m);
        Vector r = residual(X, v, least_squares_ref(X, v));
        for (auto& x : r) x *= spec.noise_scale;
        axpy(1.0, r, y);
        sys.reference = least_squares_ref(X, y);
        sys.residual_ref = std::move(r);
        break;
    }
    case Regime::Underdetermined:
        sys.reference = least_norm_ref(X, y);
        break;
    }
    sys.X = std::move(X);
    sys.y = std::move(y);
    return sys;
}

} // namespace detail

/// Standard-normal X and planted beta, y = X beta (+ r for the inconsistent
/// regime). The attached reference is recomputed from (X, y); in the
/// underdetermined regime it is the least-norm solution, not the planted beta.
/// A rank-deficient draw is retried with seed + 1, up to five attempts.
inline LinearSystem gen_gaussian(const GenSpec& spec) {
    validate(spec);
    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(attempt);
        try {
            LinearSystem sys = detail::gaussian_attempt(spec, seed);
            sys.meta = {{"generator", "gaussian"},
                        {"m", std::to_string(spec.m)},
                        {"n", std::to_string(spec.n)},
                        {"noise_scale", io::format_double(spec.noise_scale)},
                        {"regime", std::string(to_string(spec.regime))},
                        {"seed", std::to_string(seed)}};
            validate(sys);
            return sys;
        } catch (const SingularError&) {
            continue;
        }
    }
    throw SingularError("gen_gaussian: rank-deficient matrix after " + std::to_string(kMaxGenerationAttempts) +
                        " attempts starting at seed " + std::to_string(spec.seed));
}

// ---------------------------------------------------------------------------
// tomography
// ---------------------------------------------------------------------------

/// Geometry of the tomography domain: d blocks of N x N unit cells placed side
/// by side, giving an N-high, dN-wide rectangle. Unknown k*N^2 + row*N + col
/// is cell (row, col) of block k.
struct TomoGeometry {
    std::size_t N;
    std::size_t d;

    [[nodiscard]] double width() const { return static_cast<double>(d * N); }
    [[nodiscard]] double height() const { return static_cast<double>(N); }
    [[nodiscard]] std::size_t unknowns() const { return d * N * N; }

    [[nodiscard]] std::size_t cell_index(std::size_t xi, std::size_t yi) const {
        return (xi / N) * N * N + yi * N + (xi % N);
    }
};

struct Segment {
    double x0, y0, x1, y1;
};

namespace detail {

/// Point at arclength s along the rectangle perimeter, and which side it is on.
inline std::pair<std::array<double, 2>, int> perimeter_point(double s, double w, double h) {
    if (s < w) return {{s, 0.0}, 0};
    s -= w;
    if (s < h) return {{w, s}, 1};
    s -= h;
    if (s < w) return {{w - s, h}, 2};
    s -= w;
    return {{0.0, h - std::min(s, h)}, 3};
}

} // namespace detail

/// Chord between two uniform points on the domain boundary, redrawn until the
/// endpoints lie on different sides.
inline Segment random_chord(const TomoGeometry& g, Prng& rng) {
    const double w = g.width();
    const double h = g.height();
    const double perim = 2.0 * (w + h);
    while (true) {
        const auto [p, side_p] = detail::perimeter_point(rng.uniform() * perim, w, h);
        const auto [q, side_q] = detail::perimeter_point(rng.uniform() * perim, w, h);
        if (side_p == side_q) continue;
        if (std::hypot(q[0] - p[0], q[1] - p[1]) < 1e-9) continue;
        return {p[0], p[1], q[0], q[1]};
    }
}

/// Siddon-style traversal: intersection length of the segment with every cell
/// it crosses, accumulated into a dense row of length d N^2.
inline void trace_segment(const TomoGeometry& g, const Segment& seg, std::span<double> row) {
    const double dx = seg.x1 - seg.x0;
    const double dy = seg.y1 - seg.y0;
    const double len = std::hypot(dx, dy);
    const double w = g.width();
    const double h = g.height();

    std::vector<double> alphas{0.0, 1.0};
    if (dx != 0.0) {
        for (std::size_t k = 0; k <= g.d * g.N; ++k) {
            const double a = (static_cast<double>(k) - seg.x0) / dx;
            if (a > 0.0 && a < 1.0) alphas.push_back(a);
        }
    }
    if (dy != 0.0) {
        for (std::size_t k = 0; k <= g.N; ++k) {
            const double a = (static_cast<double>(k) - seg.y0) / dy;
            if (a > 0.0 && a < 1.0) alphas.push_back(a);
        }
    }
    std::sort(alphas.begin(), alphas.end());

    for (std::size_t k = 0; k + 1 < alphas.size(); ++k) {
        const double a0 = alphas[k];
        const double a1 = alphas[k + 1];
        const double piece = (a1 - a0) * len;
        if (piece <= 1e-12) continue;
        const double am = 0.5 * (a0 + a1);
        const double xm = std::clamp(seg.x0 + am * dx, 0.0, std::nextafter(w, 0.0));
        const double ym = std::clamp(seg.y0 + am * dy, 0.0, std::nextafter(h, 0.0));
        const auto xi = static_cast<std::size_t>(xm);
        const auto yi = static_cast<std::size_t>(ym);
        row[g.cell_index(xi, yi)] += piece;
    }
}

/// Smooth nonnegative image: three Gaussian bumps sampled at cell centres.
inline Vector bump_phantom(const TomoGeometry& g, Prng& rng) {
    struct Bump {
        double cx, cy, width, amp;
    };
    std::array<Bump, 3> bumps{};
    const double n = static_cast<double>(g.N);
    for (auto& b : bumps) {
        b.cx = rng.uniform() * g.width();
        b.cy = rng.uniform() * g.height();
        b.width = (0.1 + 0.15 * rng.uniform()) * n;
        b.amp = 0.5 + rng.uniform();
    }
    Vector beta(g.unknowns(), 0.0);
    for (std::size_t yi = 0; yi < g.N; ++yi) {
        for (std::size_t xi = 0; xi < g.d * g.N; ++xi) {
            const double x = static_cast<double>(xi) + 0.5;
            const double y = static_cast<double>(yi) + 0.5;
            double v = 0.0;
            for (const auto& b : bumps) {
                const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
                v += b.amp * std::exp(-r2 / (2.0 * b.width * b.width));
            }
            beta[g.cell_index(xi, yi)] = v;
        }
    }
    return beta;
}

/// N^2 random-line absorption measurements of a d N^2-cell phantom.
/// Underdetermined by construction; reference is the least-norm solution.
inline LinearSystem gen_tomography(const TomoSpec& spec) {
    if (spec.grid_n == 0) throw ConfigError("tomo: grid size must be positive");
    if (spec.oversample < 2) throw ConfigError("tomo: oversampling factor must be at least 2");
    const TomoGeometry geom{spec.grid_n, spec.oversample};
    const std::size_t m = spec.grid_n * spec.grid_n;
    const std::size_t n = geom.unknowns();

    for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
        const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(attempt);
        Prng rng(seed);
        std::vector<double> data(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            trace_segment(geom, random_chord(geom, rng), std::span<double>(data).subspan(i * n, n));
        }
        DenseMatrix X(m, n, std::move(data));
        const Vector phantom = bump_phantom(geom, rng);
        Vector y = matvec(X, phantom);
        try {
            LinearSystem sys;
            sys.reference = least_norm_ref(X, y);
            sys.X = std::move(X);
            sys.y = std::move(y);
            sys.regime = Regime::Underdetermined;
            sys.meta = {{"generator", "tomography"},
                        {"grid_n", std::to_string(spec.grid_n)},
                        {"oversample", std::to_string(spec.oversample)},
                        {"regime", std::string(to_string(Regime::Underdetermined))},
                        {"seed", std::to_string(seed)}};
            validate(sys);
            return sys;
        } catch (const SingularError&) {
            continue;
        }
    }
    throw SingularError("gen_tomography: rank-deficient matrix after " + std::to_string(kMaxGenerationAttempts) +
                        " attempts starting at seed " + std::to_string(spec.seed));
}

/// Regenerates a system from the generator parameters recorded in its meta,
/// substituting `seed`.
inline LinearSystem regenerate(const LinearSystem& sys, std::uint64_t seed) {
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = sys.meta.find(key);
        if (it == sys.meta.end()) throw ConfigError("system meta lacks '" + key + "', cannot regenerate");
        return it->second;
    };
    const std::string& gen = get("generator");
    if (gen == "gaussian") {
        GenSpec spec;
        spec.m = std::stoull(get("m"));
        spec.n = std::stoull(get("n"));
        spec.regime = parse_regime(get("regime"));
        spec.noise_scale = std::stod(get("noise_scale"));
        spec.seed = seed;
        return gen_gaussian(spec);
    }
    if (gen == "tomography") {
        TomoSpec spec;
        spec.grid_n = std::stoull(get("grid_n"));
        spec.oversample = std::stoull(get("oversample"));
        spec.seed = seed;
        return gen_tomography(spec);
    }
    throw ConfigError("unknown generator '" + gen + "' in system meta");
}

// ---------------------------------------------------------------------------
// system directories
// ---------------------------------------------------------------------------

/// Writes X.txt, y.txt, reference.txt, residual.txt (when present) and
/// meta.txt ("key=value" lines, always including regime).
inline void save_system(const LinearSystem& sys, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());

    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + (dir / name).string());
        return out;
    };
    auto close = [&](std::ofstream& out, const char* name) {
        out.flush();
        if (!out) throw ConfigError("I/O error writing " + (dir / name).string());
    };

    {
        auto out = open("X.txt");
        io::write_matrix(out, sys.X);
        close(out, "X.txt");
    }
    {
        auto out = open("y.txt");
        io::write_vector(out, sys.y);
        close(out, "y.txt");
    }
    if (sys.reference) {
        auto out = open("reference.txt");
        io::write_vector(out, *sys.reference);
        close(out, "reference.txt");
    } else {
        fs::remove(dir / "reference.txt", ec);
    }
    if (sys.residual_ref) {
        auto out = open("residual.txt");
        io::write_vector(out, *sys.residual_ref);
        close(out, "residual.txt");
    } else {
        fs::remove(dir / "residual.txt", ec);
    }
    {
        auto meta = sys.meta;
        meta["regime"] = std::string(to_string(sys.regime));
        auto out = open("meta.txt");
        for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
        close(out, "meta.txt");
    }
}

inline LinearSystem load_system(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    auto open = [&](const char* name) {
        const fs::path p = dir / name;
        std::ifstream in(p, std::ios::binary);
        if (!in) throw ConfigError("cannot read " + p.string() + " (missing file?)");
        return in;
    };

    LinearSystem sys;
    {
        auto in = open("meta.txt");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ParseError((dir / "meta.txt").string() + ":" + std::to_string(lineno) +
                                 ": expected key=value");
            }
            sys.meta[line.substr(0, eq)] = line.substr(eq + 1);
        }
        const auto it = sys.meta.find("regime");
        if (it == sys.meta.end()) throw ParseError((dir / "meta.txt").string() + ": missing 'regime' entry");
        sys.regime = parse_regime(it->second);
    }
    {
        auto in = open("X.txt");
        sys.X = io::read_matrix(in, (dir / "X.txt").string());
    }
    {
        auto in = open("y.txt");
        sys.y = io::read_vector(in, (dir / "y.txt").string());
    }
    if (fs::exists(dir / "reference.txt")) {
        auto in = open("reference.txt");
        sys.reference = io::read_vector(in, (dir / "reference.txt").string());
    }
    if (fs::exists(dir / "residual.txt")) {
        auto in = open("residual.txt");
        sys.residual_ref = io::read_vector(in, (dir / "residual.txt").string());
    }
    validate(sys);
    return sys;
}

} // namespace rkgs
