// Copyright Contributors to the fgs Project
// SPDX-License-Identifier: Apache-2.0
//
// Factorized coordinate/attribute blocks and their de-factorization into
// flat arrays of renderable Gaussians.
//
// A CP block of resolution N stores N coordinates per axis plus per-axis
// scale (N x 3), rotation (N x 4) and latent feature (N x d) factors. The
// Gaussian at grid index (i, j, k) sits at (px[i], py[j], pz[k]) and its
// attributes are component-wise triple products of the matching factor rows.
//
// A VM block adds free 2D coordinates on the xy, yz and xz planes (N x N
// each) with matching plane feature matrices; see VmMode for the two ways
// these are expanded.
//
// All flat outputs use row-major (i, j, k) order with k fastest. For VM
// per-term expansion the three terms are stacked term-major.
#pragma once

#include "fgs/types.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace fgs {

enum class ArrayRole : std::uint8_t { Coordinate, Scale, Rotation, Feature };

template <typename T>
struct FactorSetCP {
    Vector<T> px, py, pz;
    RowMatrix<T> sx, sy, sz; // N x 3
    RowMatrix<T> qx, qy, qz; // N x 4
    RowMatrix<T> fx, fy, fz; // N x d

    FactorSetCP() = default;

    /// Coordinates only. Scale factors start at one, rotation factors at
    /// (1, 0, 0, 0), feature factors at one. Rejects unequal axis lengths,
    /// empty axes, non-finite values and feature_dim < 1.
    FactorSetCP(Vector<T> x, Vector<T> y, Vector<T> z, int feature_dim);

    static FactorSetCP zeros(int resolution, int feature_dim);

    int resolution() const { return static_cast<int>(px.size()); }
    int feature_dim() const { return static_cast<int>(fx.cols()); }
    std::int64_t gaussian_count() const {
        const std::int64_t n = resolution();
        return n * n * n;
    }

    /// Throws ShapeError when any invariant is broken.
    void validate() const;

    /// Visits every factor array in serialization order.
    template <typename Fn>
    void for_each_array(Fn &&fn) {
        visit_arrays(*this, fn);
    }
    template <typename Fn>
    void for_each_array(Fn &&fn) const {
        visit_arrays(*this, fn);
    }

    template <typename U>
    FactorSetCP<U> cast() const;

  private:
    template <typename Self, typename Fn>
    static void visit_arrays(Self &self, Fn &fn) {
        fn("p_x", ArrayRole::Coordinate, self.px);
        fn("p_y", ArrayRole::Coordinate, self.py);
        fn("p_z", ArrayRole::Coordinate, self.pz);
        fn("s_x", ArrayRole::Scale, self.sx);
        fn("s_y", ArrayRole::Scale, self.sy);
        fn("s_z", ArrayRole::Scale, self.sz);
        fn("q_x", ArrayRole::Rotation, self.qx);
        fn("q_y", ArrayRole::Rotation, self.qy);
        fn("q_z", ArrayRole::Rotation, self.qz);
        fn("f_x", ArrayRole::Feature, self.fx);
        fn("f_y", ArrayRole::Feature, self.fy);
        fn("f_z", ArrayRole::Feature, self.fz);
    }
};

template <typename T>
struct FactorSetVM {
    RowMatrix<T> pxy, pyz, pxz; // (N*N) x 2, pxy[i*N + j], pyz[j*N + k], pxz[i*N + k]
    Vector<T> pz, px, py;
    RowMatrix<T> fxy, fyz, fxz; // (N*N) x d, same indexing as the planes
    RowMatrix<T> fx, fy, fz;    // N x d
    RowMatrix<T> sx, sy, sz;    // N x 3
    RowMatrix<T> qx, qy, qz;    // N x 4

    FactorSetVM() = default;

    static FactorSetVM zeros(int resolution, int feature_dim);

    /// Lifts a CP block: plane points are the cartesian grid of the axis
    /// coordinates, plane features the outer products of the axis features
    /// (so that fxy[i,j] * fz[k] reproduces the CP feature).
    static FactorSetVM from_cp(const FactorSetCP<T> &cp);

    int resolution() const { return static_cast<int>(px.size()); }
    int feature_dim() const { return static_cast<int>(fx.cols()); }
    std::int64_t gaussian_count(VmMode mode) const {
        const std::int64_t n = resolution();
        return vm_term_count(mode) * n * n * n;
    }

    void validate() const;

    template <typename Fn>
    void for_each_array(Fn &&fn) {
        visit_arrays(*this, fn);
    }
    template <typename Fn>
    void for_each_array(Fn &&fn) const {
        visit_arrays(*this, fn);
    }

    template <typename U>
    FactorSetVM<U> cast() const;

  private:
    template <typename Self, typename Fn>
    static void visit_arrays(Self &self, Fn &fn) {
        fn("p_xy", ArrayRole::Coordinate, self.pxy);
        fn("p_yz", ArrayRole::Coordinate, self.pyz);
        fn("p_xz", ArrayRole::Coordinate, self.pxz);
        fn("p_z", ArrayRole::Coordinate, self.pz);
        fn("p_x", ArrayRole::Coordinate, self.px);
        fn("p_y", ArrayRole::Coordinate, self.py);
        fn("f_xy", ArrayRole::Feature, self.fxy);
        fn("f_yz", ArrayRole::Feature, self.fyz);
        fn("f_xz", ArrayRole::Feature, self.fxz);
        fn("f_x", ArrayRole::Feature, self.fx);
        fn("f_y", ArrayRole::Feature, self.fy);
        fn("f_z", ArrayRole::Feature, self.fz);
        fn("s_x", ArrayRole::Scale, self.sx);
        fn("s_y", ArrayRole::Scale, self.sy);
        fn("s_z", ArrayRole::Scale, self.sz);
        fn("q_x", ArrayRole::Rotation, self.qx);
        fn("q_y", ArrayRole::Rotation, self.qy);
        fn("q_z", ArrayRole::Rotation, self.qz);
    }
};

/// Back-reference from an expanded Gaussian to the factor rows it came from.
struct GaussianOrigin {
    std::int32_t block = 0;
    std::int32_t term  = 0; // VM per-term index, 0 otherwise
    std::int32_t i = 0, j = 0, k = 0;

    bool operator==(const GaussianOrigin &) const = default;
};

/// Flat array of renderable Gaussians. `sh` and `opacity` stay empty until
/// the decoder has run.
template <typename T>
struct ExpandedGaussians {
    RowMatrix<T> positions; // M x 3
    RowMatrix<T> scales;    // M x 3, raw products (no activation)
    RowMatrix<T> rotations; // M x 4, unit quaternions (w, x, y, z)
    RowMatrix<T> features;  // M x d
    RowMatrix<T> sh;        // M x 48
    Vector<T> opacity;      // M
    std::vector<GaussianOrigin> origins;

    std::int64_t size() const { return positions.rows(); }
    bool decoded() const { return sh.rows() == size() && opacity.size() == size(); }

    void resize(std::int64_t count, int feature_dim);

    /// Copies row `from` of `src` into row `to` of this array (all populated fields).
    void copy_row(std::int64_t to, const ExpandedGaussians &src, std::int64_t from);
};

/// Upstream gradients with respect to the outputs of an expansion.
template <typename T>
struct ExpansionGrads {
    RowMatrix<T> positions; // M x 3
    RowMatrix<T> scales;    // M x 3
    RowMatrix<T> rotations; // M x 4, w.r.t. the normalized quaternion
    RowMatrix<T> features;  // M x d

    static ExpansionGrads zeros(std::int64_t count, int feature_dim);
};

// Quaternion normalization used by every rotation expansion. A composite
// whose norm underflows maps to the identity rotation.
template <typename T>
Eigen::Matrix<T, 4, 1> normalize_quaternion(const Eigen::Matrix<T, 4, 1> &q);

/// Gradient of normalize_quaternion at raw input q given the upstream gradient.
template <typename T>
Eigen::Matrix<T, 4, 1> normalize_quaternion_backward(const Eigen::Matrix<T, 4, 1> &q,
                                                     const Eigen::Matrix<T, 4, 1> &grad_unit);

template <typename T>
RowMatrix<T> expand_cp_coordinates(const FactorSetCP<T> &block);
template <typename T>
RowMatrix<T> expand_cp_scales(const FactorSetCP<T> &block);
template <typename T>
RowMatrix<T> expand_cp_rotations(const FactorSetCP<T> &block);
template <typename T>
RowMatrix<T> expand_cp_features(const FactorSetCP<T> &block);

template <typename T>
RowMatrix<T> expand_vm_coordinates(const FactorSetVM<T> &block, VmMode mode);
template <typename T>
RowMatrix<T> expand_vm_features(const FactorSetVM<T> &block, VmMode mode);
// Scales and rotations use the CP triple product on the (i, j, k) grid,
// repeated for each VM term.
template <typename T>
RowMatrix<T> expand_vm_scales(const FactorSetVM<T> &block, VmMode mode);
template <typename T>
RowMatrix<T> expand_vm_rotations(const FactorSetVM<T> &block, VmMode mode);

template <typename T>
ExpandedGaussians<T> expand_multi_set(std::span<const FactorSetCP<T>> blocks);
template <typename T>
ExpandedGaussians<T> expand_multi_set(std::span<const FactorSetVM<T>> blocks, VmMode mode);

/// Analytic adjoint of the CP expansion. Reads rows
/// [row_offset, row_offset + N^3) of `grads` and returns gradients shaped
/// like `block`. Accumulation runs in ascending (i, j, k) order.
template <typename T>
FactorSetCP<T> backprop_expansion(const FactorSetCP<T> &block, const ExpansionGrads<T> &grads,
                                  std::int64_t row_offset = 0);
template <typename T>
FactorSetVM<T> backprop_expansion(const FactorSetVM<T> &block, VmMode mode,
                                  const ExpansionGrads<T> &grads, std::int64_t row_offset = 0);

template <typename T>
std::vector<FactorSetCP<T>> backprop_multi_set(std::span<const FactorSetCP<T>> blocks,
                                               const ExpansionGrads<T> &grads);
template <typename T>
std::vector<FactorSetVM<T>> backprop_multi_set(std::span<const FactorSetVM<T>> blocks, VmMode mode,
                                               const ExpansionGrads<T> &grads);

} // namespace fgs
