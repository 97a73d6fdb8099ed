// Copyright 2026 The Voxforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace voxforge {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Failure categories; the CLI maps these onto its exit codes.
enum class ErrorKind {
    Usage,      // bad arguments or configuration
    Data,       // malformed, missing or inconsistent input
    Numerical,  // degenerate geometry, divergence, non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_data(const std::string& what) {
    throw Error(ErrorKind::Data, what);
}

[[noreturn]] inline void fail_numerical(const std::string& what) {
    throw Error(ErrorKind::Numerical, what);
}

[[noreturn]] inline void fail_usage(const std::string& what) {
    throw Error(ErrorKind::Usage, what);
}

// Degree-0 real spherical harmonic, as used by 3DGS colour encoding.
inline constexpr double kShC0 = 0.28209479177387814;

inline double sh0_to_color(double h) { return 0.5 + kShC0 * h; }
inline double color_to_sh0(double c) { return (c - 0.5) / kShC0; }

}  // namespace voxforge
