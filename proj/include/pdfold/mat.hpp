#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdfold {

// Dense row-major matrix of doubles. The one numeric container of the
// whole toolkit; scalars are 1x1, column vectors Lx1.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Mat: negative shape");
    }
    Mat(int rows, int cols, std::vector<double> data)
        : rows_(rows), cols_(cols), d_(std::move(data)) {
        if (d_.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("Mat: data size does not match shape");
    }

    static Mat zeros(int r, int c) { return Mat(r, c, 0.0); }
    static Mat full(int r, int c, double v) { return Mat(r, c, v); }
    static Mat scalar(double v) { return Mat(1, 1, v); }
    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const int r = static_cast<int>(rows.size());
        const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
        Mat m(r, c);
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c)
                throw std::invalid_argument("Mat: ragged initializer");
            int j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return d_.size(); }
    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int i, int j) { return d_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return d_[static_cast<std::size_t>(i) * cols_ + j]; }
    double& operator[](std::size_t k) { return d_[k]; }
    double operator[](std::size_t k) const { return d_[k]; }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    const std::vector<double>& vec() const { return d_; }

    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw std::logic_error("Mat: not a scalar");
        return d_[0];
    }

    Mat t() const {
        Mat r(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    void fill(double v) { d_.assign(d_.size(), v); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> d_;
};

inline void check_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
}

inline Mat add(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "add");
    Mat r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += b[k];
    return r;
}

inline Mat sub(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "sub");
    Mat r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= b[k];
    return r;
}

inline Mat hadamard(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "hadamard");
    Mat r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] *= b[k];
    return r;
}

inline Mat scaled(const Mat& a, double s) {
    Mat r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] *= s;
    return r;
}

inline Mat shifted(const Mat& a, double s) {
    Mat r = a;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += s;
    return r;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Mat r(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    }
    return r;
}

// Lx1 column of row sums.
inline Mat row_sums(const Mat& a) {
    Mat r(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j);
        r(i, 0) = s;
    }
    return r;
}

inline double sum(const Mat& a) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k];
    return s;
}

inline double dot(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double max_abs(const Mat& a) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k]));
    return m;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k] - b[k]));
    return m;
}

inline bool all_finite(const Mat& a) {
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!std::isfinite(a[k])) return false;
    return true;
}

inline bool is_symmetric(const Mat& a, double tol = 0.0) {
    if (a.rows() != a.cols()) return false;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j)
            if (std::fabs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

}  // namespace pdfold
