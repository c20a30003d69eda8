#pragma once

#include "rkgs/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rkgs {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// vector kernels
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    Vector out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
    return out;
}

inline double distance_sq(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

// ---------------------------------------------------------------------------
// DenseMatrix
// ---------------------------------------------------------------------------

/// Immutable row-major real matrix. Row norms, column norms and the Frobenius
/// norm are computed once at construction, together with a column-major copy
/// so that column methods read contiguous memory.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows_ == 0 || cols_ == 0) throw DimensionError("DenseMatrix: dimensions must be positive");
        if (data_.size() != rows_ * cols_) {
            std::ostringstream os;
            os << "DenseMatrix: expected " << rows_ * cols_ << " entries for a " << rows_ << "x" << cols_
               << " matrix, got " << data_.size();
            throw DimensionError(os.str());
        }
        build_caches();
    }

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t m = rows.size();
        const std::size_t n = m == 0 ? 0 : rows.begin()->size();
        std::vector<double> data;
        data.reserve(m * n);
        for (const auto& r : rows) {
            if (r.size() != n) throw DimensionError("DenseMatrix::from_rows: ragged rows");
            data.insert(data.end(), r.begin(), r.end());
        }
        return DenseMatrix(m, n, std::move(data));
    }

    static DenseMatrix identity(std::size_t n) {
        std::vector<double> data(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) data[k * n + k] = 1.0;
        return DenseMatrix(n, n, std::move(data));
    }

    static DenseMatrix diagonal(std::span<const double> d) {
        const std::size_t n = d.size();
        std::vector<double> data(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k) data[k * n + k] = d[k];
        return DenseMatrix(n, n, std::move(data));
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    [[nodiscard]] std::span<const double> col(std::size_t j) const {
        return {transposed_.data() + j * rows_, rows_};
    }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] double row_norm_sq(std::size_t i) const { return row_norms_sq_[i]; }
    [[nodiscard]] double col_norm_sq(std::size_t j) const { return col_norms_sq_[j]; }
    [[nodiscard]] std::span<const double> row_norms_sq() const noexcept { return row_norms_sq_; }
    [[nodiscard]] std::span<const double> col_norms_sq() const noexcept { return col_norms_sq_; }
    [[nodiscard]] double frob_sq() const noexcept { return frob_sq_; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    void build_caches() {
        transposed_.assign(rows_ * cols_, 0.0);
        row_norms_sq_.assign(rows_, 0.0);
        col_norms_sq_.assign(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                const double v = data_[i * cols_ + j];
                transposed_[j * rows_ + i] = v;
                row_norms_sq_[i] += v * v;
            }
        }
        for (std::size_t j = 0; j < cols_; ++j) col_norms_sq_[j] = norm_sq(col(j));
        frob_sq_ = 0.0;
        for (double r : row_norms_sq_) frob_sq_ += r;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
    std::vector<double> transposed_;
    Vector row_norms_sq_;
    Vector col_norms_sq_;
    double frob_sq_ = 0.0;
};

// ---------------------------------------------------------------------------
// products
// ---------------------------------------------------------------------------

inline Vector matvec(const DenseMatrix& X, std::span<const double> v) {
    if (v.size() != X.cols()) {
        std::ostringstream os;
        os << "matvec: vector of length " << v.size() << " does not match " << X.rows() << "x" << X.cols()
           << " matrix";
        throw DimensionError(os.str());
    }
    Vector out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = dot(X.row(i), v);
    return out;
}

/// X^T v
inline Vector rmatvec(const DenseMatrix& X, std::span<const double> v) {
    if (v.size() != X.rows()) {
        std::ostringstream os;
        os << "rmatvec: vector of length " << v.size() << " does not match " << X.rows() << "x" << X.cols()
           << " matrix";
        throw DimensionError(os.str());
    }
    Vector out(X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) out[j] = dot(X.col(j), v);
    return out;
}

/// y - X beta
inline Vector residual(const DenseMatrix& X, std::span<const double> y, std::span<const double> beta) {
    Vector r = matvec(X, beta);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
    return r;
}

/// X^T X
inline DenseMatrix gram_of_cols(const DenseMatrix& X) {
    const std::size_t k = X.cols();
    std::vector<double> g(k * k);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            const double v = dot(X.col(a), X.col(b));
            g[a * k + b] = v;
            g[b * k + a] = v;
        }
    }
    return DenseMatrix(k, k, std::move(g));
}

/// X X^T
inline DenseMatrix gram_of_rows(const DenseMatrix& X) {
    const std::size_t k = X.rows();
    std::vector<double> g(k * k);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            const double v = dot(X.row(a), X.row(b));
            g[a * k + b] = v;
            g[b * k + a] = v;
        }
    }
    return DenseMatrix(k, k, std::move(g));
}

/// Gram matrix of the smaller dimension: X^T X when cols <= rows, else X X^T.
inline DenseMatrix small_gram(const DenseMatrix& X) {
    return X.cols() <= X.rows() ? gram_of_cols(X) : gram_of_rows(X);
}

// ---------------------------------------------------------------------------
// symmetric eigenvalues
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric matrix, ascending (Householder tridiagonalization
/// and implicit QL via Eigen).
inline Vector symmetric_eigenvalues(const DenseMatrix& S) {
    if (S.rows() != S.cols()) throw DimensionError("symmetric_eigenvalues: matrix is not square");
    const auto n = static_cast<Eigen::Index>(S.rows());
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        S.data().data(), n, n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric_eigenvalues: QL iteration did not converge");
    const auto& ev = solver.eigenvalues();
    return Vector(ev.data(), ev.data() + ev.size());
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Lower-triangular factor of a symmetric positive-definite matrix.
class Cholesky {
public:
    explicit Cholesky(const DenseMatrix& S) : n_(S.rows()), l_(n_ * n_, 0.0) {
        if (S.rows() != S.cols()) throw DimensionError("Cholesky: matrix is not square");
        for (std::size_t j = 0; j < n_; ++j) {
            double d = S(j, j);
            for (std::size_t k = 0; k < j; ++k) d -= l_[j * n_ + k] * l_[j * n_ + k];
            if (!(d > 0.0)) {
                std::ostringstream os;
                os << "Cholesky: non-positive pivot " << d << " at index " << j;
                throw SingularError(os.str());
            }
            const double ljj = std::sqrt(d);
            l_[j * n_ + j] = ljj;
            for (std::size_t i = j + 1; i < n_; ++i) {
                double v = S(i, j);
                for (std::size_t k = 0; k < j; ++k) v -= l_[i * n_ + k] * l_[j * n_ + k];
                l_[i * n_ + j] = v / ljj;
            }
        }
    }

    [[nodiscard]] Vector solve(std::span<const double> b) const {
        Vector x(b.begin(), b.end());
        for (std::size_t i = 0; i < n_; ++i) {
            double v = x[i];
            for (std::size_t k = 0; k < i; ++k) v -= l_[i * n_ + k] * x[k];
            x[i] = v / l_[i * n_ + i];
        }
        for (std::size_t i = n_; i-- > 0;) {
            double v = x[i];
            for (std::size_t k = i + 1; k < n_; ++k) v -= l_[k * n_ + i] * x[k];
            x[i] = v / l_[i * n_ + i];
        }
        return x;
    }

private:
    std::size_t n_;
    std::vector<double> l_;
};

// ---------------------------------------------------------------------------
// spectral summary
// ---------------------------------------------------------------------------

/// Eigenvalues below this fraction of the largest Gram eigenvalue count as zero.
inline constexpr double kRankThreshold = 1e-10;

struct SpectralSummary {
    double sigma_min = 0.0;   ///< smallest nonzero singular value
    double sigma_max = 0.0;
    double kappa = 1.0;       ///< sigma_max / sigma_min
    double lambda_min = 0.0;  ///< smallest positive Gram eigenvalue
    double trace_sigma = 0.0; ///< trace of the Gram matrix, equal to frob_sq
    std::size_t rank = 0;
};

inline SpectralSummary spectral_summary(const DenseMatrix& X) {
    if (X.frob_sq() == 0.0) throw ConfigError("spectral_summary: matrix is zero");
    const Vector eig = symmetric_eigenvalues(small_gram(X));
    const double lambda_max = eig.back();
    const double cutoff = kRankThreshold * lambda_max;
    SpectralSummary s;
    for (double e : eig) {
        if (e > cutoff) {
            if (s.rank == 0) s.lambda_min = e;
            ++s.rank;
        }
    }
    s.sigma_min = std::sqrt(s.lambda_min);
    s.sigma_max = std::sqrt(lambda_max);
    s.kappa = s.sigma_max / s.sigma_min;
    s.trace_sigma = X.frob_sq();
    return s;
}

namespace detail {

inline void require_full_rank(const DenseMatrix& gram, std::string_view what) {
    const Vector eig = symmetric_eigenvalues(gram);
    const double ratio = eig.back() > 0.0 ? eig.front() / eig.back() : 0.0;
    if (!(ratio > kRankThreshold)) {
        std::ostringstream os;
        os << what << ": Gram matrix is rank deficient (smallest/largest eigenvalue ratio " << ratio
           << " <= " << kRankThreshold << ")";
        throw SingularError(os.str());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// reference solutions
// ---------------------------------------------------------------------------

/// Least-squares solution via the normal equations (X^T X) b = X^T y, with one
/// step of iterative refinement.
inline Vector least_squares_ref(const DenseMatrix& X, std::span<const double> y) {
    if (X.rows() < X.cols()) throw DimensionError("least_squares_ref: requires rows >= cols");
    if (y.size() != X.rows()) throw DimensionError("least_squares_ref: right-hand side length mismatch");
    const DenseMatrix gram = gram_of_cols(X);
    detail::require_full_rank(gram, "least_squares_ref");
    const Cholesky chol(gram);
    Vector beta = chol.solve(rmatvec(X, y));
    const Vector correction = chol.solve(rmatvec(X, residual(X, y, beta)));
    axpy(1.0, correction, beta);
    return beta;
}

/// Minimum-norm solution X^T (X X^T)^{-1} y, with one step of iterative refinement.
inline Vector least_norm_ref(const DenseMatrix& X, std::span<const double> y) {
    if (X.rows() > X.cols()) throw DimensionError("least_norm_ref: requires rows <= cols");
    if (y.size() != X.rows()) throw DimensionError("least_norm_ref: right-hand side length mismatch");
    const DenseMatrix gram = gram_of_rows(X);
    detail::require_full_rank(gram, "least_norm_ref");
    const Cholesky chol(gram);
    Vector coeffs = chol.solve(y);
    const Vector correction = chol.solve(residual(X, y, rmatvec(X, coeffs)));
    axpy(1.0, correction, coeffs);
    return rmatvec(X, coeffs);
}

/// Orthogonal projector onto the row span of a full-row-rank X (rows <= cols).
class RowSpanProjector {
public:
    explicit RowSpanProjector(const DenseMatrix& X) : X_(&X), chol_(checked_gram(X)) {}

    [[nodiscard]] Vector project(std::span<const double> w) const {
        return rmatvec(*X_, chol_.solve(matvec(*X_, w)));
    }

    /// w minus its row-span component
    [[nodiscard]] Vector complement(std::span<const double> w) const {
        return subtract(w, project(w));
    }

private:
    static DenseMatrix checked_gram(const DenseMatrix& X) {
        if (X.rows() > X.cols()) throw DimensionError("RowSpanProjector: requires rows <= cols");
        DenseMatrix g = gram_of_rows(X);
        detail::require_full_rank(g, "RowSpanProjector");
        return g;
    }

    const DenseMatrix* X_;
    Cholesky chol_;
};

/// P_i w = w - X^i (X^i . w) / |X^i|^2, in O(n).
inline Vector apply_row_projector(const DenseMatrix& X, std::size_t i, std::span<const double> w) {
    if (w.size() != X.cols()) throw DimensionError("apply_row_projector: vector length mismatch");
    const double rn = X.row_norm_sq(i);
    if (!(rn > 0.0)) {
        std::ostringstream os;
        os << "apply_row_projector: row " << i << " is zero";
        throw ConfigError(os.str());
    }
    Vector out(w.begin(), w.end());
    axpy(-dot(X.row(i), w) / rn, X.row(i), out);
    return out;
}

// ---------------------------------------------------------------------------
// LinearSystem
// ---------------------------------------------------------------------------

enum class Regime { OverConsistent, OverInconsistent, Underdetermined };

inline std::string_view to_string(Regime r) {
    switch (r) {
    case Regime::OverConsistent: return "over-consistent";
    case Regime::OverInconsistent: return "over-inconsistent";
    case Regime::Underdetermined: return "underdetermined";
    }
    return "?";
}

inline Regime parse_regime(std::string_view s) {
    if (s == "over-consistent" || s == "OverConsistent") return Regime::OverConsistent;
    if (s == "over-inconsistent" || s == "OverInconsistent") return Regime::OverInconsistent;
    if (s == "underdetermined" || s == "Underdetermined") return Regime::Underdetermined;
    throw ConfigError("unknown regime '" + std::string(s) +
                      "' (expected over-consistent, over-inconsistent or underdetermined)");
}

inline bool is_consistent(Regime r) { return r != Regime::OverInconsistent; }

struct LinearSystem {
    DenseMatrix X;
    Vector y;
    Regime regime = Regime::OverConsistent;
    std::optional<Vector> reference;    ///< beta*, beta_LS or beta_LN depending on regime
    std::optional<Vector> residual_ref; ///< y - X beta_LS, inconsistent systems only
    std::map<std::string, std::string> meta; ///< provenance (generator, seed, ...)

    [[nodiscard]] std::size_t rows() const noexcept { return X.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return X.cols(); }
};

/// Throws ConfigError when shapes, regime or attached references are inconsistent.
inline void validate(const LinearSystem& sys) {
    const std::size_t m = sys.rows();
    const std::size_t n = sys.cols();
    std::ostringstream os;
    if (sys.y.size() != m) {
        os << "LinearSystem: y has length " << sys.y.size() << ", expected " << m;
        throw DimensionError(os.str());
    }
    switch (sys.regime) {
    case Regime::OverConsistent:
        if (m < n) os << "LinearSystem: over-consistent regime requires rows >= cols, got " << m << "x" << n;
        break;
    case Regime::OverInconsistent:
        if (m <= n) os << "LinearSystem: over-inconsistent regime requires rows > cols, got " << m << "x" << n;
        break;
    case Regime::Underdetermined:
        if (m >= n) os << "LinearSystem: underdetermined regime requires rows < cols, got " << m << "x" << n;
        break;
    }
    if (!os.str().empty()) throw ConfigError(os.str());

    if (sys.reference && sys.reference->size() != n) throw DimensionError("LinearSystem: reference length mismatch");
    if (sys.residual_ref && sys.residual_ref->size() != m)
        throw DimensionError("LinearSystem: residual length mismatch");

    if (sys.regime == Regime::OverInconsistent && sys.residual_ref) {
        const double lhs = std::sqrt(norm_sq(rmatvec(sys.X, *sys.residual_ref)));
        const double rhs = 1e-8 * std::sqrt(sys.X.frob_sq()) * std::sqrt(norm_sq(*sys.residual_ref));
        if (lhs > rhs) {
            os << "LinearSystem: residual is not orthogonal to the columns (|X^T r| = " << lhs << ")";
            throw ConfigError(os.str());
        }
    }
    if (is_consistent(sys.regime) && sys.reference) {
        const double lhs = std::sqrt(norm_sq(residual(sys.X, sys.y, *sys.reference)));
        const double rhs = 1e-8 * std::sqrt(norm_sq(sys.y));
        if (lhs > rhs) {
            os << "LinearSystem: reference does not solve the system (|X b - y| = " << lhs << ")";
            throw ConfigError(os.str());
        }
    }
}

inline Vector least_squares_ref(const LinearSystem& sys) { return least_squares_ref(sys.X, sys.y); }
inline Vector least_norm_ref(const LinearSystem& sys) { return least_norm_ref(sys.X, sys.y); }

} // namespace rkgs
