#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// Conditional-expectation basis over the forward state.
///   GlobalPoly: multivariate monomials of total degree <= degree in
///     standardized coordinates.
///   LocalPartition: equal-width cells over the sample range (k = 1 only)
///     with a constant or linear fit per cell.
struct RegressionBasis {
    enum class Kind { GlobalPoly, LocalPartition };
    Kind kind = Kind::GlobalPoly;
    int degree = 3;
    int n_cells = 8;

    static RegressionBasis global_poly(int degree) {
        require(degree >= 0, "invalid-parameters", "global_poly: degree must be >= 0");
        return {Kind::GlobalPoly, degree, 0};
    }
    static RegressionBasis local_partition(int n_cells, int degree) {
        require(n_cells >= 1, "invalid-parameters", "local_partition: n_cells must be >= 1");
        require(degree >= 0 && degree <= 1, "invalid-parameters",
                "local_partition supports degree <= 1");
        return {Kind::LocalPartition, degree, n_cells};
    }
};

namespace detail {

inline std::vector<std::vector<int>> total_degree_exponents(int k, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(k, 0);
    std::function<void(int, int)> rec = [&](int dim, int budget) {
        if (dim == k) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= budget; ++e) {
            cur[dim] = e;
            rec(dim + 1, budget - e);
        }
        cur[dim] = 0;
    };
    rec(0, degree);
    return out;
}

}  // namespace detail

/// Evaluates basis functions for one step's path cloud. Standardization
/// constants are frozen from the cloud itself, so evaluation is in-sample.
class BasisFrame {
public:
    BasisFrame(const RegressionBasis& spec, const Real* states, std::size_t n_paths,
               std::size_t stride, int k)
        : spec_(spec), k_(k) {
        require(spec.kind == RegressionBasis::Kind::GlobalPoly || k == 1,
                "unsupported-dimension", "local_partition basis requires k = 1");
        center_.assign(k, 0.0);
        scale_.assign(k, 1.0);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int c = 0; c < k; ++c) center_[c] += states[p * stride + c];
        for (int c = 0; c < k; ++c) center_[c] /= static_cast<Real>(n_paths);
        std::vector<Real> var(k, 0.0);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int c = 0; c < k; ++c) var[c] += sqr(states[p * stride + c] - center_[c]);
        for (int c = 0; c < k; ++c) {
            const Real s = std::sqrt(var[c] / static_cast<Real>(n_paths));
            scale_[c] = s > 1e-12 ? s : 1.0;
        }
        if (spec.kind == RegressionBasis::Kind::GlobalPoly) {
            exponents_ = detail::total_degree_exponents(k, spec.degree);
            size_ = exponents_.size();
        } else {
            lo_ = states[0];
            hi_ = states[0];
            for (std::size_t p = 0; p < n_paths; ++p) {
                lo_ = std::min(lo_, states[p * stride]);
                hi_ = std::max(hi_, states[p * stride]);
            }
            if (hi_ <= lo_) hi_ = lo_ + 1.0;
            size_ = static_cast<std::size_t>(spec.n_cells) * (spec.degree + 1);
        }
    }

    std::size_t size() const { return size_; }

    void evaluate(std::span<const Real> x, std::span<Real> out) const {
        if (spec_.kind == RegressionBasis::Kind::GlobalPoly) {
            for (std::size_t b = 0; b < exponents_.size(); ++b) {
                Real v = 1.0;
                for (int c = 0; c < k_; ++c) {
                    const Real xt = (x[c] - center_[c]) / scale_[c];
                    for (int e = 0; e < exponents_[b][c]; ++e) v *= xt;
                }
                out[b] = v;
            }
        } else {
            std::fill(out.begin(), out.end(), 0.0);
            const Real w = (hi_ - lo_) / spec_.n_cells;
            int cell = static_cast<int>((x[0] - lo_) / w);
            cell = std::clamp(cell, 0, spec_.n_cells - 1);
            out[cell * (spec_.degree + 1)] = 1.0;
            if (spec_.degree == 1)
                out[cell * (spec_.degree + 1) + 1] = (x[0] - center_[0]) / scale_[0];
        }
    }

    int cell_of(std::span<const Real> x) const {
        if (spec_.kind == RegressionBasis::Kind::GlobalPoly) return 0;
        const Real w = (hi_ - lo_) / spec_.n_cells;
        return std::clamp(static_cast<int>((x[0] - lo_) / w), 0, spec_.n_cells - 1);
    }

    int cell_count() const {
        return spec_.kind == RegressionBasis::Kind::GlobalPoly ? 1 : spec_.n_cells;
    }

private:
    RegressionBasis spec_;
    int k_;
    std::vector<Real> center_, scale_;
    std::vector<std::vector<int>> exponents_;
    Real lo_ = 0.0, hi_ = 1.0;
    std::size_t size_ = 0;
};

struct JointFit {
    Eigen::MatrixXd continuation;  // n_paths x d, fitted E[target | X]
    Eigen::MatrixXd zmat;          // n_paths x (d*r), martingale loadings / sqrt(dt)
    bool rank_deficient = false;
    bool constant_target = false;
    int rank = 0;
    Real residual_rms = 0.0;
};

/// One joint least squares of the target on [phi(x), phi(x) dW_j / sqrt(dt)].
/// The phi block yields the continuation value and the dW block the Z
/// estimate; the dynamic-programming residual is then orthogonal to the
/// basis by the normal equations. Bitwise-constant targets short-circuit to
/// an exact fit with Z = 0. Rank-deficient designs fall back to per-cell
/// means and are flagged.
inline JointFit joint_regression(const BasisFrame& frame, const Real* states,
                                 std::size_t state_stride, const Real* incr,
                                 std::size_t incr_stride, const Real* target,
                                 std::size_t target_stride, std::size_t n_paths, int k,
                                 int d, int r, Real dt) {
    JointFit fit;
    fit.continuation.resize(n_paths, d);
    fit.zmat = Eigen::MatrixXd::Zero(n_paths, d * r);

    bool constant = true;
    for (int c = 0; c < d && constant; ++c) {
        const Real v0 = target[c];
        for (std::size_t p = 1; p < n_paths; ++p) {
            if (target[p * target_stride + c] != v0) {
                constant = false;
                break;
            }
        }
    }
    if (constant) {
        fit.constant_target = true;
        fit.rank = 1;
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int c = 0; c < d; ++c) fit.continuation(p, c) = target[c];
        return fit;
    }

    const std::size_t B = frame.size();
    const std::size_t cols = B * (1 + r);
    const Real isdt = 1.0 / std::sqrt(dt);
    Eigen::MatrixXd G(n_paths, cols);
    std::vector<Real> phi(B);
    for (std::size_t p = 0; p < n_paths; ++p) {
        frame.evaluate({states + p * state_stride, static_cast<std::size_t>(k)}, phi);
        for (std::size_t b = 0; b < B; ++b) G(p, b) = phi[b];
        for (int j = 0; j < r; ++j) {
            const Real w = incr[p * incr_stride + j] * isdt;
            for (std::size_t b = 0; b < B; ++b) G(p, B * (1 + j) + b) = phi[b] * w;
        }
    }
    Eigen::MatrixXd Y(n_paths, d);
    for (std::size_t p = 0; p < n_paths; ++p)
        for (int c = 0; c < d; ++c) Y(p, c) = target[p * target_stride + c];

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    fit.rank = static_cast<int>(qr.rank());
    fit.rank_deficient = fit.rank < static_cast<int>(cols);
    // rank-revealing QR zeroes the dependent columns, so the fitted values are
    // still the projection onto the design's column space
    const Eigen::MatrixXd beta = qr.solve(Y);
    if (beta.allFinite()) {
        fit.continuation = G.leftCols(B) * beta.topRows(B);
        for (int j = 0; j < r; ++j) {
            const Eigen::MatrixXd zj =
                G.leftCols(B) * beta.middleRows(B * (1 + j), B);  // n_paths x d
            for (std::size_t p = 0; p < n_paths; ++p)
                for (int c = 0; c < d; ++c) fit.zmat(p, c * r + j) = zj(p, c);
        }
        const Eigen::MatrixXd resid = Y - G * beta;
        fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<Real>(n_paths));
    } else {
        // solve breakdown: fall back to per-cell means with an increment
        // regression per cell
        fit.rank_deficient = true;
        const int n_cells = frame.cell_count();
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n_cells, d);
        Eigen::MatrixXd zmean = Eigen::MatrixXd::Zero(n_cells, d * r);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(n_cells);
        std::vector<int> cell(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) {
            cell[p] =
                frame.cell_of({states + p * state_stride, static_cast<std::size_t>(k)});
            count(cell[p]) += 1.0;
            for (int c = 0; c < d; ++c) mean(cell[p], c) += Y(p, c);
        }
        for (int cc = 0; cc < n_cells; ++cc)
            if (count(cc) > 0) mean.row(cc) /= count(cc);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (int c = 0; c < d; ++c)
                for (int j = 0; j < r; ++j)
                    zmean(cell[p], c * r + j) +=
                        (Y(p, c) - mean(cell[p], c)) * incr[p * incr_stride + j] / dt;
        for (int cc = 0; cc < n_cells; ++cc)
            if (count(cc) > 0) zmean.row(cc) /= count(cc);
        for (std::size_t p = 0; p < n_paths; ++p) {
            fit.continuation.row(p) = mean.row(cell[p]);
            fit.zmat.row(p) = zmean.row(cell[p]) * std::sqrt(dt);  // undone below
        }
    }
    // zmat currently holds loadings against dW/sqrt(dt); convert to Z
    fit.zmat /= std::sqrt(dt);
    return fit;
}

/// RMS norm of the basis projection of a residual matrix (n_paths x d) on
/// the same joint design; certifies the least-squares fixed point.
inline Real projected_residual_rms(const BasisFrame& frame, const Real* states,
                                   std::size_t state_stride, const Real* incr,
                                   std::size_t incr_stride,
                                   const Eigen::MatrixXd& residual, int k, int r, Real dt) {
    const std::size_t n_paths = residual.rows();
    const std::size_t B = frame.size();
    const std::size_t cols = B * (1 + r);
    const Real isdt = 1.0 / std::sqrt(dt);
    Eigen::MatrixXd G(n_paths, cols);
    std::vector<Real> phi(B);
    for (std::size_t p = 0; p < n_paths; ++p) {
        frame.evaluate({states + p * state_stride, static_cast<std::size_t>(k)}, phi);
        for (std::size_t b = 0; b < B; ++b) G(p, b) = phi[b];
        for (int j = 0; j < r; ++j) {
            const Real w = incr[p * incr_stride + j] * isdt;
            for (std::size_t b = 0; b < B; ++b) G(p, B * (1 + j) + b) = phi[b] * w;
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    const Eigen::MatrixXd fitted = G * qr.solve(residual);
    return std::sqrt(fitted.squaredNorm() / static_cast<Real>(n_paths));
}

}  // namespace logbsde
