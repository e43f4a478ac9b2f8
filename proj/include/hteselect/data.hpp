#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hteselect {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline Matrix take_rows(const Matrix& m, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

inline Vector take_rows(const Vector& v, const std::vector<int>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
    return out;
}

// Observed triple: covariates, binary treatment, outcome.
struct Dataset {
    Matrix X;
    Vector A;
    Vector Y;

    int n() const { return static_cast<int>(X.rows()); }
    int d() const { return static_cast<int>(X.cols()); }

    void validate() const {
        require(X.rows() >= 1 && X.cols() >= 1, "dataset must have at least one row and one column");
        require(A.size() == X.rows() && Y.size() == X.rows(), "dataset fields must have equal lengths");
        require(all_finite(X) && all_finite(Y), "dataset contains non-finite values");
        for (Eigen::Index i = 0; i < A.size(); ++i)
            require(A(i) == 0.0 || A(i) == 1.0, "treatment vector must be binary");
    }
};

inline bool has_both_groups(const Vector& a) {
    bool any0 = false, any1 = false;
    for (Eigen::Index i = 0; i < a.size(); ++i) (a(i) == 1.0 ? any1 : any0) = true;
    return any0 && any1;
}

inline std::vector<int> group_rows(const Vector& a, double value) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) == value) rows.push_back(static_cast<int>(i));
    return rows;
}

// Oracle quantities available only in simulation.
struct GroundTruth {
    Vector tau;
    Vector mu0;
    Vector mu1;
    Vector pi;
    Vector y0;
    Vector y1;
};

}  // namespace hteselect
