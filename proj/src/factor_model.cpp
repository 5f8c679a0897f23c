// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "fgs/factor_model.hpp"

#include "fgs/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fgs {

namespace {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived> &m) {
    return m.allFinite();
}

void require(bool ok, const std::string &what) {
    if (!ok) {
        throw ShapeError(what);
    }
}

template <typename T>
void check_factor(const RowMatrix<T> &m, int n, int cols, const char *name) {
    require(m.rows() == n && m.cols() == cols,
            std::string("factor ") + name + " has shape " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", expected " + std::to_string(n) + "x" +
                std::to_string(cols));
}

template <typename T>
RowMatrix<T> identity_rotation_rows(int n) {
    RowMatrix<T> q = RowMatrix<T>::Zero(n, kRotationDims);
    q.col(0).setOnes();
    return q;
}

// Component-wise triple product a[i] * b[j] * c[k] over the full grid.
template <typename T>
void triple_product(const RowMatrix<T> &a, const RowMatrix<T> &b, const RowMatrix<T> &c,
                    RowMatrix<T> &out, std::int64_t row_offset) {
    const int n    = static_cast<int>(a.rows());
    const int cols = static_cast<int>(a.cols());
    std::int64_t row = row_offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                for (int ch = 0; ch < cols; ++ch) {
                    out(row, ch) = a(i, ch) * b(j, ch) * c(k, ch);
                }
            }
        }
    }
}

template <typename T>
void normalized_triple_product(const RowMatrix<T> &a, const RowMatrix<T> &b, const RowMatrix<T> &c,
                               RowMatrix<T> &out, std::int64_t row_offset) {
    const int n = static_cast<int>(a.rows());
    std::int64_t row = row_offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                Eigen::Matrix<T, 4, 1> q;
                for (int ch = 0; ch < kRotationDims; ++ch) {
                    q[ch] = a(i, ch) * b(j, ch) * c(k, ch);
                }
                out.row(row) = normalize_quaternion<T>(q).transpose();
            }
        }
    }
}

// Adjoint of triple_product: accumulates into da, db, dc.
template <typename T>
void triple_product_backward(const RowMatrix<T> &a, const RowMatrix<T> &b, const RowMatrix<T> &c,
                             const RowMatrix<T> &grad, std::int64_t row_offset, RowMatrix<T> &da,
                             RowMatrix<T> &db, RowMatrix<T> &dc) {
    const int n    = static_cast<int>(a.rows());
    const int cols = static_cast<int>(a.cols());
    std::int64_t row = row_offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                for (int ch = 0; ch < cols; ++ch) {
                    const T g = grad(row, ch);
                    da(i, ch) += g * b(j, ch) * c(k, ch);
                    db(j, ch) += g * a(i, ch) * c(k, ch);
                    dc(k, ch) += g * a(i, ch) * b(j, ch);
                }
            }
        }
    }
}

template <typename T>
void rotation_backward(const RowMatrix<T> &a, const RowMatrix<T> &b, const RowMatrix<T> &c,
                       const RowMatrix<T> &grad_unit, std::int64_t row_offset, RowMatrix<T> &da,
                       RowMatrix<T> &db, RowMatrix<T> &dc) {
    const int n = static_cast<int>(a.rows());
    std::int64_t row = row_offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                Eigen::Matrix<T, 4, 1> q;
                for (int ch = 0; ch < kRotationDims; ++ch) {
                    q[ch] = a(i, ch) * b(j, ch) * c(k, ch);
                }
                const Eigen::Matrix<T, 4, 1> gu = grad_unit.row(row).transpose();
                const Eigen::Matrix<T, 4, 1> gq = normalize_quaternion_backward<T>(q, gu);
                for (int ch = 0; ch < kRotationDims; ++ch) {
                    da(i, ch) += gq[ch] * b(j, ch) * c(k, ch);
                    db(j, ch) += gq[ch] * a(i, ch) * c(k, ch);
                    dc(k, ch) += gq[ch] * a(i, ch) * b(j, ch);
                }
            }
        }
    }
}

template <typename T>
void check_grads(const ExpansionGrads<T> &g, std::int64_t rows_needed, int d) {
    require(g.positions.cols() == 3 && g.scales.cols() == kScaleDims &&
                g.rotations.cols() == kRotationDims && g.features.cols() == d,
            "expansion gradient widths do not match the block");
    require(g.positions.rows() >= rows_needed && g.scales.rows() >= rows_needed &&
                g.rotations.rows() >= rows_needed && g.features.rows() >= rows_needed,
            "expansion gradients have fewer rows than the block expands to");
}

template <typename T>
void fill_origins(std::vector<GaussianOrigin> &origins, std::int64_t offset, int block, int term,
                  int n) {
    std::int64_t row = offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                origins[row] = GaussianOrigin{block, term, i, j, k};
            }
        }
    }
}

template <typename T>
void check_common_dim(std::span<const T> blocks) {
    if (blocks.empty()) {
        return;
    }
    const int d = blocks.front().feature_dim();
    for (const auto &b : blocks) {
        b.validate();
        require(b.feature_dim() == d, "blocks disagree on feature dimension");
    }
}

// VM coordinates for one term (or the shared grid) written at row_offset.
template <typename T>
void vm_coordinates_into(const FactorSetVM<T> &b, VmMode mode, RowMatrix<T> &out,
                         std::int64_t row_offset) {
    const int n = b.resolution();
    for (int term = 0; term < vm_term_count(mode); ++term) {
        std::int64_t row = row_offset + term * static_cast<std::int64_t>(n) * n * n;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k, ++row) {
                    if (mode == VmMode::SharedGridSum) {
                        out(row, 0) = b.px[i];
                        out(row, 1) = b.py[j];
                        out(row, 2) = b.pz[k];
                    } else if (term == 0) {
                        out(row, 0) = b.pxy(i * n + j, 0);
                        out(row, 1) = b.pxy(i * n + j, 1);
                        out(row, 2) = b.pz[k];
                    } else if (term == 1) {
                        out(row, 0) = b.px[i];
                        out(row, 1) = b.pyz(j * n + k, 0);
                        out(row, 2) = b.pyz(j * n + k, 1);
                    } else {
                        out(row, 0) = b.pxz(i * n + k, 0);
                        out(row, 1) = b.py[j];
                        out(row, 2) = b.pxz(i * n + k, 1);
                    }
                }
            }
        }
    }
}

template <typename T>
void vm_features_into(const FactorSetVM<T> &b, VmMode mode, RowMatrix<T> &out,
                      std::int64_t row_offset) {
    const int n = b.resolution();
    const int d = b.feature_dim();
    for (int term = 0; term < vm_term_count(mode); ++term) {
        std::int64_t row = row_offset + term * static_cast<std::int64_t>(n) * n * n;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k, ++row) {
                    const int ij = i * n + j, jk = j * n + k, ik = i * n + k;
                    for (int c = 0; c < d; ++c) {
                        if (mode == VmMode::SharedGridSum) {
                            out(row, c) = b.fxy(ij, c) * b.fz(k, c) + b.fyz(jk, c) * b.fx(i, c) +
                                          b.fxz(ik, c) * b.fy(j, c);
                        } else if (term == 0) {
                            out(row, c) = b.fxy(ij, c) * b.fz(k, c);
                        } else if (term == 1) {
                            out(row, c) = b.fyz(jk, c) * b.fx(i, c);
                        } else {
                            out(row, c) = b.fxz(ik, c) * b.fy(j, c);
                        }
                    }
                }
            }
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// FactorSetCP

template <typename T>
FactorSetCP<T>::FactorSetCP(Vector<T> x, Vector<T> y, Vector<T> z, int feature_dim)
    : px(std::move(x)), py(std::move(y)), pz(std::move(z)) {
    require(px.size() == py.size() && py.size() == pz.size(),
            "factorized coordinates must have the same length on every axis");
    require(px.size() > 0, "factorized coordinates must not be empty");
    require(feature_dim >= 1, "feature dimension must be at least 1");
    const int n = resolution();
    sx = sy = sz = RowMatrix<T>::Ones(n, kScaleDims);
    qx = qy = qz = identity_rotation_rows<T>(n);
    fx = fy = fz = RowMatrix<T>::Ones(n, feature_dim);
    validate();
}

template <typename T>
FactorSetCP<T> FactorSetCP<T>::zeros(int resolution, int feature_dim) {
    require(resolution >= 1 && feature_dim >= 1, "block resolution and feature dim must be >= 1");
    FactorSetCP b;
    b.px = b.py = b.pz = Vector<T>::Zero(resolution);
    b.sx = b.sy = b.sz = RowMatrix<T>::Zero(resolution, kScaleDims);
    b.qx = b.qy = b.qz = RowMatrix<T>::Zero(resolution, kRotationDims);
    b.fx = b.fy = b.fz = RowMatrix<T>::Zero(resolution, feature_dim);
    return b;
}

template <typename T>
void FactorSetCP<T>::validate() const {
    const int n = resolution();
    require(n >= 1, "block resolution must be at least 1");
    require(py.size() == n && pz.size() == n,
            "factorized coordinates must have the same length on every axis");
    require(all_finite(px) && all_finite(py) && all_finite(pz),
            "factorized coordinates must be finite");
    const int d = static_cast<int>(fx.cols());
    require(d >= 1, "feature dimension must be at least 1");
    check_factor(sx, n, kScaleDims, "s_x");
    check_factor(sy, n, kScaleDims, "s_y");
    check_factor(sz, n, kScaleDims, "s_z");
    check_factor(qx, n, kRotationDims, "q_x");
    check_factor(qy, n, kRotationDims, "q_y");
    check_factor(qz, n, kRotationDims, "q_z");
    check_factor(fx, n, d, "f_x");
    check_factor(fy, n, d, "f_y");
    check_factor(fz, n, d, "f_z");
}

template <typename T>
template <typename U>
FactorSetCP<U> FactorSetCP<T>::cast() const {
    FactorSetCP<U> out;
    out.px = px.template cast<U>();
    out.py = py.template cast<U>();
    out.pz = pz.template cast<U>();
    out.sx = sx.template cast<U>();
    out.sy = sy.template cast<U>();
    out.sz = sz.template cast<U>();
    out.qx = qx.template cast<U>();
    out.qy = qy.template cast<U>();
    out.qz = qz.template cast<U>();
    out.fx = fx.template cast<U>();
    out.fy = fy.template cast<U>();
    out.fz = fz.template cast<U>();
    return out;
}

// ---------------------------------------------------------------------------
// FactorSetVM

template <typename T>
FactorSetVM<T> FactorSetVM<T>::zeros(int resolution, int feature_dim) {
    require(resolution >= 1 && feature_dim >= 1, "block resolution and feature dim must be >= 1");
    const int n = resolution;
    FactorSetVM b;
    b.pxy = b.pyz = b.pxz = RowMatrix<T>::Zero(n * n, 2);
    b.pz = b.px = b.py = Vector<T>::Zero(n);
    b.fxy = b.fyz = b.fxz = RowMatrix<T>::Zero(n * n, feature_dim);
    b.fx = b.fy = b.fz = RowMatrix<T>::Zero(n, feature_dim);
    b.sx = b.sy = b.sz = RowMatrix<T>::Zero(n, kScaleDims);
    b.qx = b.qy = b.qz = RowMatrix<T>::Zero(n, kRotationDims);
    return b;
}

template <typename T>
FactorSetVM<T> FactorSetVM<T>::from_cp(const FactorSetCP<T> &cp) {
    cp.validate();
    const int n = cp.resolution();
    const int d = cp.feature_dim();
    FactorSetVM b = zeros(n, d);
    b.px = cp.px;
    b.py = cp.py;
    b.pz = cp.pz;
    for (int a = 0; a < n; ++a) {
        for (int c = 0; c < n; ++c) {
            b.pxy.row(a * n + c) << cp.px[a], cp.py[c];
            b.pyz.row(a * n + c) << cp.py[a], cp.pz[c];
            b.pxz.row(a * n + c) << cp.px[a], cp.pz[c];
            b.fxy.row(a * n + c) = cp.fx.row(a).cwiseProduct(cp.fy.row(c));
            b.fyz.row(a * n + c) = cp.fy.row(a).cwiseProduct(cp.fz.row(c));
            b.fxz.row(a * n + c) = cp.fx.row(a).cwiseProduct(cp.fz.row(c));
        }
    }
    b.fx = cp.fx;
    b.fy = cp.fy;
    b.fz = cp.fz;
    b.sx = cp.sx;
    b.sy = cp.sy;
    b.sz = cp.sz;
    b.qx = cp.qx;
    b.qy = cp.qy;
    b.qz = cp.qz;
    return b;
}

template <typename T>
void FactorSetVM<T>::validate() const {
    const int n = resolution();
    require(n >= 1, "block resolution must be at least 1");
    require(py.size() == n && pz.size() == n, "VM line coordinates must share one resolution");
    check_factor(pxy, n * n, 2, "p_xy");
    check_factor(pyz, n * n, 2, "p_yz");
    check_factor(pxz, n * n, 2, "p_xz");
    require(all_finite(px) && all_finite(py) && all_finite(pz) && all_finite(pxy) &&
                all_finite(pyz) && all_finite(pxz),
            "factorized coordinates must be finite");
    const int d = static_cast<int>(fx.cols());
    require(d >= 1, "feature dimension must be at least 1");
    check_factor(fxy, n * n, d, "f_xy");
    check_factor(fyz, n * n, d, "f_yz");
    check_factor(fxz, n * n, d, "f_xz");
    check_factor(fx, n, d, "f_x");
    check_factor(fy, n, d, "f_y");
    check_factor(fz, n, d, "f_z");
    check_factor(sx, n, kScaleDims, "s_x");
    check_factor(sy, n, kScaleDims, "s_y");
    check_factor(sz, n, kScaleDims, "s_z");
    check_factor(qx, n, kRotationDims, "q_x");
    check_factor(qy, n, kRotationDims, "q_y");
    check_factor(qz, n, kRotationDims, "q_z");
}

template <typename T>
template <typename U>
FactorSetVM<U> FactorSetVM<T>::cast() const {
    FactorSetVM<U> out;
    out.pxy = pxy.template cast<U>();
    out.pyz = pyz.template cast<U>();
    out.pxz = pxz.template cast<U>();
    out.pz  = pz.template cast<U>();
    out.px  = px.template cast<U>();
    out.py  = py.template cast<U>();
    out.fxy = fxy.template cast<U>();
    out.fyz = fyz.template cast<U>();
    out.fxz = fxz.template cast<U>();
    out.fx  = fx.template cast<U>();
    out.fy  = fy.template cast<U>();
    out.fz  = fz.template cast<U>();
    out.sx  = sx.template cast<U>();
    out.sy  = sy.template cast<U>();
    out.sz  = sz.template cast<U>();
    out.qx  = qx.template cast<U>();
    out.qy  = qy.template cast<U>();
    out.qz  = qz.template cast<U>();
    return out;
}

// ---------------------------------------------------------------------------
// ExpandedGaussians

template <typename T>
void ExpandedGaussians<T>::resize(std::int64_t count, int feature_dim) {
    positions.resize(count, 3);
    scales.resize(count, kScaleDims);
    rotations.resize(count, kRotationDims);
    features.resize(count, feature_dim);
    sh.resize(0, kShCoeffs);
    opacity.resize(0);
    origins.resize(static_cast<std::size_t>(count));
}

template <typename T>
void ExpandedGaussians<T>::copy_row(std::int64_t to, const ExpandedGaussians &src,
                                    std::int64_t from) {
    positions.row(to) = src.positions.row(from);
    scales.row(to)    = src.scales.row(from);
    rotations.row(to) = src.rotations.row(from);
    if (src.features.rows() > 0) {
        features.row(to) = src.features.row(from);
    }
    if (src.decoded()) {
        sh.row(to)  = src.sh.row(from);
        opacity[to] = src.opacity[from];
    }
    origins[to] = src.origins[from];
}

template <typename T>
ExpansionGrads<T> ExpansionGrads<T>::zeros(std::int64_t count, int feature_dim) {
    ExpansionGrads g;
    g.positions = RowMatrix<T>::Zero(count, 3);
    g.scales    = RowMatrix<T>::Zero(count, kScaleDims);
    g.rotations = RowMatrix<T>::Zero(count, kRotationDims);
    g.features  = RowMatrix<T>::Zero(count, feature_dim);
    return g;
}

// ---------------------------------------------------------------------------
// Quaternion normalization

template <typename T>
Eigen::Matrix<T, 4, 1> normalize_quaternion(const Eigen::Matrix<T, 4, 1> &q) {
    const T n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
    if (!(n2 >= std::numeric_limits<T>::min())) {
        return Eigen::Matrix<T, 4, 1>(T(1), T(0), T(0), T(0));
    }
    const T inv = T(1) / std::sqrt(n2);
    return q * inv;
}

template <typename T>
Eigen::Matrix<T, 4, 1> normalize_quaternion_backward(const Eigen::Matrix<T, 4, 1> &q,
                                                     const Eigen::Matrix<T, 4, 1> &grad_unit) {
    const T n2 = q.squaredNorm();
    if (!(n2 >= std::numeric_limits<T>::min())) {
        return Eigen::Matrix<T, 4, 1>::Zero();
    }
    const T n                       = std::sqrt(n2);
    const Eigen::Matrix<T, 4, 1> u  = q / n;
    return (grad_unit - u * u.dot(grad_unit)) / n;
}

// ---------------------------------------------------------------------------
// CP expansion

template <typename T>
RowMatrix<T> expand_cp_coordinates(const FactorSetCP<T> &block) {
    block.validate();
    const int n = block.resolution();
    RowMatrix<T> out(block.gaussian_count(), 3);
    std::int64_t row = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                out(row, 0) = block.px[i];
                out(row, 1) = block.py[j];
                out(row, 2) = block.pz[k];
            }
        }
    }
    return out;
}

template <typename T>
RowMatrix<T> expand_cp_scales(const FactorSetCP<T> &block) {
    block.validate();
    RowMatrix<T> out(block.gaussian_count(), kScaleDims);
    triple_product(block.sx, block.sy, block.sz, out, 0);
    return out;
}

template <typename T>
RowMatrix<T> expand_cp_rotations(const FactorSetCP<T> &block) {
    block.validate();
    RowMatrix<T> out(block.gaussian_count(), kRotationDims);
    normalized_triple_product(block.qx, block.qy, block.qz, out, 0);
    return out;
}

template <typename T>
RowMatrix<T> expand_cp_features(const FactorSetCP<T> &block) {
    block.validate();
    RowMatrix<T> out(block.gaussian_count(), block.feature_dim());
    triple_product(block.fx, block.fy, block.fz, out, 0);
    return out;
}

template <typename T>
ExpandedGaussians<T> expand_multi_set(std::span<const FactorSetCP<T>> blocks) {
    check_common_dim(blocks);
    std::int64_t total = 0;
    for (const auto &b : blocks) {
        total += b.gaussian_count();
    }
    ExpandedGaussians<T> out;
    out.resize(total, blocks.empty() ? 1 : blocks.front().feature_dim());
    std::vector<std::int64_t> offsets(blocks.size());
    std::int64_t offset = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        offsets[b] = offset;
        offset += blocks[b].gaussian_count();
    }
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks.size()); ++b) {
        const auto &blk = blocks[b];
        const int n     = blk.resolution();
        std::int64_t row = offsets[b];
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k, ++row) {
                    out.positions(row, 0) = blk.px[i];
                    out.positions(row, 1) = blk.py[j];
                    out.positions(row, 2) = blk.pz[k];
                }
            }
        }
        triple_product(blk.sx, blk.sy, blk.sz, out.scales, offsets[b]);
        normalized_triple_product(blk.qx, blk.qy, blk.qz, out.rotations, offsets[b]);
        triple_product(blk.fx, blk.fy, blk.fz, out.features, offsets[b]);
        fill_origins<T>(out.origins, offsets[b], static_cast<int>(b), 0, n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// VM expansion

template <typename T>
RowMatrix<T> expand_vm_coordinates(const FactorSetVM<T> &block, VmMode mode) {
    block.validate();
    RowMatrix<T> out(block.gaussian_count(mode), 3);
    vm_coordinates_into(block, mode, out, 0);
    return out;
}

template <typename T>
RowMatrix<T> expand_vm_features(const FactorSetVM<T> &block, VmMode mode) {
    block.validate();
    if (mode != VmMode::PerTermProduct && mode != VmMode::SharedGridSum) {
        throw ShapeError("unknown VM expansion mode");
    }
    RowMatrix<T> out(block.gaussian_count(mode), block.feature_dim());
    vm_features_into(block, mode, out, 0);
    return out;
}

template <typename T>
RowMatrix<T> expand_vm_scales(const FactorSetVM<T> &block, VmMode mode) {
    block.validate();
    const std::int64_t per_term = block.gaussian_count(VmMode::SharedGridSum);
    RowMatrix<T> out(block.gaussian_count(mode), kScaleDims);
    for (int t = 0; t < vm_term_count(mode); ++t) {
        triple_product(block.sx, block.sy, block.sz, out, t * per_term);
    }
    return out;
}

template <typename T>
RowMatrix<T> expand_vm_rotations(const FactorSetVM<T> &block, VmMode mode) {
    block.validate();
    const std::int64_t per_term = block.gaussian_count(VmMode::SharedGridSum);
    RowMatrix<T> out(block.gaussian_count(mode), kRotationDims);
    for (int t = 0; t < vm_term_count(mode); ++t) {
        normalized_triple_product(block.qx, block.qy, block.qz, out, t * per_term);
    }
    return out;
}

template <typename T>
ExpandedGaussians<T> expand_multi_set(std::span<const FactorSetVM<T>> blocks, VmMode mode) {
    check_common_dim(blocks);
    if (mode != VmMode::PerTermProduct && mode != VmMode::SharedGridSum) {
        throw ShapeError("unknown VM expansion mode");
    }
    std::vector<std::int64_t> offsets(blocks.size());
    std::int64_t total = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        offsets[b] = total;
        total += blocks[b].gaussian_count(mode);
    }
    ExpandedGaussians<T> out;
    out.resize(total, blocks.empty() ? 1 : blocks.front().feature_dim());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks.size()); ++b) {
        const auto &blk             = blocks[b];
        const int n                 = blk.resolution();
        const std::int64_t per_term = static_cast<std::int64_t>(n) * n * n;
        vm_coordinates_into(blk, mode, out.positions, offsets[b]);
        vm_features_into(blk, mode, out.features, offsets[b]);
        for (int t = 0; t < vm_term_count(mode); ++t) {
            const std::int64_t off = offsets[b] + t * per_term;
            triple_product(blk.sx, blk.sy, blk.sz, out.scales, off);
            normalized_triple_product(blk.qx, blk.qy, blk.qz, out.rotations, off);
            fill_origins<T>(out.origins, off, static_cast<int>(b), t, n);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
FactorSetCP<T> backprop_expansion(const FactorSetCP<T> &block, const ExpansionGrads<T> &grads,
                                  std::int64_t row_offset) {
    block.validate();
    const int n = block.resolution();
    const int d = block.feature_dim();
    check_grads(grads, row_offset + block.gaussian_count(), d);

    FactorSetCP<T> g = FactorSetCP<T>::zeros(n, d);
    std::int64_t row = row_offset;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k, ++row) {
                g.px[i] += grads.positions(row, 0);
                g.py[j] += grads.positions(row, 1);
                g.pz[k] += grads.positions(row, 2);
            }
        }
    }
    triple_product_backward(block.sx, block.sy, block.sz, grads.scales, row_offset, g.sx, g.sy,
                            g.sz);
    rotation_backward(block.qx, block.qy, block.qz, grads.rotations, row_offset, g.qx, g.qy, g.qz);
    triple_product_backward(block.fx, block.fy, block.fz, grads.features, row_offset, g.fx, g.fy,
                            g.fz);
    return g;
}

template <typename T>
FactorSetVM<T> backprop_expansion(const FactorSetVM<T> &block, VmMode mode,
                                  const ExpansionGrads<T> &grads, std::int64_t row_offset) {
    block.validate();
    if (mode != VmMode::PerTermProduct && mode != VmMode::SharedGridSum) {
        throw ShapeError("unknown VM expansion mode");
    }
    const int n = block.resolution();
    const int d = block.feature_dim();
    check_grads(grads, row_offset + block.gaussian_count(mode), d);
    const std::int64_t per_term = static_cast<std::int64_t>(n) * n * n;

    FactorSetVM<T> g = FactorSetVM<T>::zeros(n, d);
    for (int term = 0; term < vm_term_count(mode); ++term) {
        const std::int64_t base = row_offset + term * per_term;
        std::int64_t row        = base;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k, ++row) {
                    const int ij = i * n + j, jk = j * n + k, ik = i * n + k;
                    const T g0 = grads.positions(row, 0);
                    const T g1 = grads.positions(row, 1);
                    const T g2 = grads.positions(row, 2);
                    if (mode == VmMode::SharedGridSum) {
                        g.px[i] += g0;
                        g.py[j] += g1;
                        g.pz[k] += g2;
                    } else if (term == 0) {
                        g.pxy(ij, 0) += g0;
                        g.pxy(ij, 1) += g1;
                        g.pz[k] += g2;
                    } else if (term == 1) {
                        g.px[i] += g0;
                        g.pyz(jk, 0) += g1;
                        g.pyz(jk, 1) += g2;
                    } else {
                        g.pxz(ik, 0) += g0;
                        g.py[j] += g1;
                        g.pxz(ik, 1) += g2;
                    }
                    for (int c = 0; c < d; ++c) {
                        const T gf       = grads.features(row, c);
                        const bool shared = mode == VmMode::SharedGridSum;
                        if (shared || term == 0) {
                            g.fxy(ij, c) += gf * block.fz(k, c);
                            g.fz(k, c) += gf * block.fxy(ij, c);
                        }
                        if (shared || term == 1) {
                            g.fyz(jk, c) += gf * block.fx(i, c);
                            g.fx(i, c) += gf * block.fyz(jk, c);
                        }
                        if (shared || term == 2) {
                            g.fxz(ik, c) += gf * block.fy(j, c);
                            g.fy(j, c) += gf * block.fxz(ik, c);
                        }
                    }
                }
            }
        }
        triple_product_backward(block.sx, block.sy, block.sz, grads.scales, base, g.sx, g.sy, g.sz);
        rotation_backward(block.qx, block.qy, block.qz, grads.rotations, base, g.qx, g.qy, g.qz);
    }
    return g;
}

template <typename T>
std::vector<FactorSetCP<T>> backprop_multi_set(std::span<const FactorSetCP<T>> blocks,
                                               const ExpansionGrads<T> &grads) {
    std::vector<std::int64_t> offsets(blocks.size());
    std::int64_t total = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        offsets[b] = total;
        total += blocks[b].gaussian_count();
    }
    if (grads.positions.rows() != total) {
        throw ShapeError("expansion gradients do not match the total Gaussian count");
    }
    std::vector<FactorSetCP<T>> out(blocks.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks.size()); ++b) {
        out[b] = backprop_expansion(blocks[b], grads, offsets[b]);
    }
    return out;
}

template <typename T>
std::vector<FactorSetVM<T>> backprop_multi_set(std::span<const FactorSetVM<T>> blocks, VmMode mode,
                                               const ExpansionGrads<T> &grads) {
    std::vector<std::int64_t> offsets(blocks.size());
    std::int64_t total = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        offsets[b] = total;
        total += blocks[b].gaussian_count(mode);
    }
    if (grads.positions.rows() != total) {
        throw ShapeError("expansion gradients do not match the total Gaussian count");
    }
    std::vector<FactorSetVM<T>> out(blocks.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks.size()); ++b) {
        out[b] = backprop_expansion(blocks[b], mode, grads, offsets[b]);
    }
    return out;
}

#define FGS_INSTANTIATE(T)                                                                         \
    template struct FactorSetCP<T>;                                                                \
    template struct FactorSetVM<T>;                                                                \
    template struct ExpandedGaussians<T>;                                                          \
    template struct ExpansionGrads<T>;                                                             \
    template Eigen::Matrix<T, 4, 1> normalize_quaternion<T>(const Eigen::Matrix<T, 4, 1> &);       \
    template Eigen::Matrix<T, 4, 1> normalize_quaternion_backward<T>(                              \
        const Eigen::Matrix<T, 4, 1> &, const Eigen::Matrix<T, 4, 1> &);                           \
    template RowMatrix<T> expand_cp_coordinates<T>(const FactorSetCP<T> &);                        \
    template RowMatrix<T> expand_cp_scales<T>(const FactorSetCP<T> &);                             \
    template RowMatrix<T> expand_cp_rotations<T>(const FactorSetCP<T> &);                          \
    template RowMatrix<T> expand_cp_features<T>(const FactorSetCP<T> &);                           \
    template RowMatrix<T> expand_vm_coordinates<T>(const FactorSetVM<T> &, VmMode);                \
    template RowMatrix<T> expand_vm_features<T>(const FactorSetVM<T> &, VmMode);                   \
    template RowMatrix<T> expand_vm_scales<T>(const FactorSetVM<T> &, VmMode);                     \
    template RowMatrix<T> expand_vm_rotations<T>(const FactorSetVM<T> &, VmMode);                  \
    template ExpandedGaussians<T> expand_multi_set<T>(std::span<const FactorSetCP<T>>);            \
    template ExpandedGaussians<T> expand_multi_set<T>(std::span<const FactorSetVM<T>>, VmMode);    \
    template FactorSetCP<T> backprop_expansion<T>(const FactorSetCP<T> &,                          \
                                                  const ExpansionGrads<T> &, std::int64_t);        \
    template FactorSetVM<T> backprop_expansion<T>(const FactorSetVM<T> &, VmMode,                  \
                                                  const ExpansionGrads<T> &, std::int64_t);        \
    template std::vector<FactorSetCP<T>> backprop_multi_set<T>(std::span<const FactorSetCP<T>>,    \
                                                               const ExpansionGrads<T> &);         \
    template std::vector<FactorSetVM<T>> backprop_multi_set<T>(std::span<const FactorSetVM<T>>,    \
                                                               VmMode, const ExpansionGrads<T> &);

FGS_INSTANTIATE(float)
FGS_INSTANTIATE(double)
#undef FGS_INSTANTIATE

template FactorSetCP<double> FactorSetCP<float>::cast<double>() const;
template FactorSetCP<float> FactorSetCP<double>::cast<float>() const;
template FactorSetVM<double> FactorSetVM<float>::cast<double>() const;
template FactorSetVM<float> FactorSetVM<double>::cast<float>() const;

} // namespace fgs
