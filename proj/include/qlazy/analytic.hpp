// Copyright 2026 The qlazy Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/**
 * @file
 * Closed forms for the two-layer standard circuit with the local-Z
 * observable. Expectations are over theta_j i.i.d. Uniform[-2pi, 2pi].
 *
 * Indices are 0-based and cyclic mod m; parameter k is theta_k of the first
 * RX layer and m + k is theta_{m+k} of the second.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "circuit.hpp"

namespace qlazy::analytic {

namespace detail {

inline std::size_t wrap(long k, std::size_t m) {
    const long mm = static_cast<long>(m);
    return static_cast<std::size_t>(((k % mm) + mm) % mm);
}

inline void require_two_layers(std::size_t m, std::size_t p, const char *who) {
    if (m < 3) {
        throw InvalidArgument(std::string(who) + ": requires m >= 3");
    }
    if (p != 2 * m) {
        throw InvalidArgument(std::string(who) +
                              ": closed form only covers L = 2 (p = 2m), got p = " +
                              std::to_string(p) + " for m = " + std::to_string(m));
    }
}

/// cos(xhat_{k-1}) cos(xhat_k) cos(xhat_{k+1}).
inline double neighbourhood_cos(const EncodedFeatures &xhat, std::size_t k) {
    const std::size_t m = xhat.size();
    const long kk = static_cast<long>(k);
    return std::cos(xhat[wrap(kk - 1, m)]) * std::cos(xhat[k]) *
           std::cos(xhat[wrap(kk + 1, m)]);
}

} // namespace detail

/**
 * f_k = cos(xh_k) cos(t_{m+k}) cos(t_k)
 *     - cos(xh_{k-1}) cos(xh_k) cos(xh_{k+1}) cos(t_{k-1}) cos(t_{k+1})
 *       sin(t_k) sin(t_{m+k}).
 */
inline double analytic_fk(std::span<const double> theta,
                          const EncodedFeatures &xhat, std::size_t k) {
    const std::size_t m = xhat.size();
    detail::require_two_layers(m, theta.size(), "analytic_fk");
    if (k >= m) {
        throw InvalidArgument("analytic_fk: k out of range");
    }
    const long kk = static_cast<long>(k);
    const double t_prev = theta[detail::wrap(kk - 1, m)];
    const double t_k = theta[k];
    const double t_next = theta[detail::wrap(kk + 1, m)];
    const double t_top = theta[m + k];
    return std::cos(xhat[k]) * std::cos(t_top) * std::cos(t_k) -
           detail::neighbourhood_cos(xhat, k) * std::cos(t_prev) *
               std::cos(t_next) * std::sin(t_k) * std::sin(t_top);
}

/// (1/sqrt m) sum_k f_k.
inline double analytic_model(std::span<const double> theta,
                             const EncodedFeatures &xhat) {
    double s = 0.0;
    for (std::size_t k = 0; k < xhat.size(); ++k) {
        s += analytic_fk(theta, xhat, k);
    }
    return s / std::sqrt(static_cast<double>(xhat.size()));
}

/**
 * E[K(x, x')] = (1/4m) sum_k [ 2 cos(xh_k) cos(xh'_k)
 *               + prod_{i in k-1,k,k+1} cos(xh_i) cos(xh'_i) ].
 */
inline double analytic_mean_kernel(const EncodedFeatures &xhat,
                                   const EncodedFeatures &xhat2) {
    const std::size_t m = xhat.size();
    if (xhat2.size() != m) {
        throw InvalidArgument("analytic_mean_kernel: feature length mismatch");
    }
    if (m < 3) {
        throw InvalidArgument("analytic_mean_kernel: requires m >= 3");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        s += 2.0 * std::cos(xhat[k]) * std::cos(xhat2[k]) +
             detail::neighbourhood_cos(xhat, k) * detail::neighbourhood_cos(xhat2, k);
    }
    return s / (4.0 * static_cast<double>(m));
}

/**
 * E[d_j f_k(x) d_j f_k(x')] for j = (k-1, k, k+1, m+k), in that order.
 */
inline std::array<double, 4>
analytic_gradient_expectations(const EncodedFeatures &xhat,
                               const EncodedFeatures &xhat2, std::size_t k) {
    if (xhat2.size() != xhat.size()) {
        throw InvalidArgument(
            "analytic_gradient_expectations: feature length mismatch");
    }
    if (k >= xhat.size()) {
        throw InvalidArgument("analytic_gradient_expectations: k out of range");
    }
    const double cube =
        detail::neighbourhood_cos(xhat, k) * detail::neighbourhood_cos(xhat2, k) /
        16.0;
    const double centre = 0.25 * std::cos(xhat[k]) * std::cos(xhat2[k]);
    return {cube, centre + cube, cube, centre + cube};
}

/// |(theta, x)> = RX(theta) RY(x)|0>: sum_b (-1)^b |<b|(theta, x)>|^2.
inline double single_qubit_z(double theta, double x) {
    return std::cos(theta) * std::cos(x);
}

/**
 * With |(theta, b, s)> = cos(theta/2)|b> + i(-1)^s sin(theta/2)|b+1>:
 * sum_b (-1)^b |<(theta, b, s)|(theta2, x)>|^2.
 */
inline double twisted_overlap_z(double theta, double theta2, double x, int s) {
    const double sign = (s % 2 == 0) ? 1.0 : -1.0;
    return std::cos(x) * (std::cos(theta) * std::cos(theta2) -
                          sign * std::sin(theta) * std::sin(theta2));
}

struct StateIdentities {
    double part_i;
    double part_ii;
};

/// Part (i) at (theta, x) and part (ii) at (theta, theta2, x, s).
inline StateIdentities analytic_state_identities(double theta, double x,
                                                 double theta2, int s) {
    return {single_qubit_z(theta, x), twisted_overlap_z(theta, theta2, x, s)};
}

} // namespace qlazy::analytic
