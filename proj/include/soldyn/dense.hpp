#ifndef SOLDYN_DENSE_HPP
#define SOLDYN_DENSE_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace soldyn {

/// Row-major dense matrix, just enough linear algebra for the Galerkin
/// eigensolves and the small Newton systems.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

/// Solve A x = b by partial-pivot LU (A overwritten). Small systems only.
inline std::vector<double> solve_lu(Matrix A, std::vector<double> b) {
    const std::size_t n = A.rows;
    if (A.cols != n || b.size() != n) throw std::invalid_argument("solve_lu: shape mismatch");
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(A(r, c)) > std::fabs(A(p, c))) p = r;
        if (std::fabs(A(p, c)) < 1e-300) throw std::runtime_error("solve_lu: singular matrix");
        if (p != c) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(p, j), A(c, j));
            std::swap(b[p], b[c]);
        }
        for (std::size_t r = c + 1; r < n; ++r) {
            double f = A(r, c) / A(c, c);
            A(r, c) = 0.0;
            for (std::size_t j = c + 1; j < n; ++j) A(r, j) -= f * A(c, j);
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
        x[i] = s / A(i, i);
    }
    return x;
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues
/// (ascending); V columns hold the eigenvectors if requested.
inline std::vector<double> jacobi_eigensymm(Matrix A, Matrix* V = nullptr) {
    const std::size_t n = A.rows;
    if (A.cols != n) throw std::invalid_argument("jacobi: not square");
    Matrix Q(n, n);
    for (std::size_t i = 0; i < n; ++i) Q(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-26 * double(n) * double(n)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = A(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                double theta = 0.5 * (A(q, q) - A(p, p)) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double qkp = Q(k, p), qkq = Q(k, q);
                    Q(k, p) = c * qkp - s * qkq;
                    Q(k, q) = s * qkp + c * qkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (A(order[j], order[j]) < A(order[i], order[i])) std::swap(order[i], order[j]);
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = A(order[i], order[i]);
    if (V) {
        *V = Matrix(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) (*V)(i, j) = Q(i, order[j]);
    }
    return ev;
}

/// Smallest eigenvalue of the pencil (A, B), A symmetric, B SPD, by reduction
/// through the eigen-factorization of B (discarding near-null B-modes).
/// If vec is given it receives the minimizing coefficient vector.
inline double min_generalized_eig(const Matrix& A, const Matrix& B,
                                  std::vector<double>* vec = nullptr) {
    const std::size_t n = A.rows;
    Matrix VB;
    Matrix Bc = B;
    auto eb = jacobi_eigensymm(Bc, &VB);
    double emax = eb.back();
    // columns of S = VB * diag(1/sqrt(eb)) for retained modes
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (eb[i] > 1e-12 * emax) keep.push_back(i);
    const std::size_t m = keep.size();
    if (m == 0) throw std::runtime_error("generalized eig: B is numerically null");
    Matrix S(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            S(i, j) = VB(i, keep[j]) / std::sqrt(eb[keep[j]]);
    // C = S^T A S
    Matrix AS(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += A(i, k) * S(k, j);
            AS(i, j) = s;
        }
    Matrix C(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += S(k, i) * AS(k, j);
            C(i, j) = s;
        }
    Matrix VC;
    auto ec = jacobi_eigensymm(C, vec ? &VC : nullptr);
    if (vec) {
        vec->assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) (*vec)[i] += S(i, j) * VC(j, 0);
    }
    return ec.front();
}

/// Ordinary least squares fit: returns coefficients c minimizing ||Xc - y||.
inline std::vector<double> least_squares(const Matrix& X, const std::vector<double>& y) {
    const std::size_t n = X.rows, p = X.cols;
    if (y.size() != n) throw std::invalid_argument("least_squares: shape mismatch");
    Matrix G(p, p);
    std::vector<double> rhs(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += X(k, i) * X(k, j);
            G(i, j) = s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += X(k, i) * y[k];
        rhs[i] = s;
    }
    return solve_lu(G, rhs);
}

/// Slope of the least-squares line through (x_i, y_i).
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    Matrix X(x.size(), 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = x[i];
    }
    return least_squares(X, y)[1];
}

} // namespace soldyn

#endif
