// Angle encoding of classical feature vectors.
//
// A feature vector u is squashed component-wise to angles
// a_i = angle_scale * tanh(u_i), then loaded onto one qubit per feature as
// H |0> followed by RY(a_i). The resulting product state satisfies
// <Z_i> = -sin(a_i), so the readout is injective while |a_i| < pi/2.

#pragma once

#include "qtl/qsim.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace qtl::encoding {

struct EncodingSpec {
    int n_features = 6;
    double angle_scale = std::numbers::pi / 2; // radians per unit squashed input

    void validate() const {
        if (n_features < 1) throw std::invalid_argument("EncodingSpec: n_features must be >= 1");
        if (!(angle_scale > 0.0))
            throw std::invalid_argument("EncodingSpec: angle_scale must be positive");
    }
};

/// a_i = angle_scale * tanh(u_i), so every angle lies in (-angle_scale, angle_scale).
inline std::vector<double> squash(std::span<const double> u, double angle_scale) {
    std::vector<double> angles(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) angles[i] = angle_scale * std::tanh(u[i]);
    return angles;
}

inline std::vector<double> squash(std::span<const double> u, const EncodingSpec& spec) {
    return squash(u, spec.angle_scale);
}

/// d a_i / d u_i = angle_scale * (1 - tanh^2(u_i)); the Jacobian is diagonal.
inline std::vector<double> squash_derivative(std::span<const double> u, double angle_scale) {
    std::vector<double> deriv(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double t = std::tanh(u[i]);
        deriv[i] = angle_scale * (1.0 - t * t);
    }
    return deriv;
}

/// Gate sequence of the encoding layer: H on every qubit, then RY(a_i) on qubit i.
inline void append_encoding_gates(qsim::Circuit& circuit, std::span<const double> angles) {
    for (int q = 0; q < circuit.n_qubits; ++q) circuit.gates.push_back(qsim::Gate::h(q));
    for (int q = 0; q < circuit.n_qubits; ++q)
        circuit.gates.push_back(qsim::Gate::ry(q, angles[q]));
}

/// (prod_i RY_i(a_i)) H^(x)n |0...0>, a product state of unit norm.
inline qsim::StateVector encode(std::span<const double> angles, int n_qubits) {
    if (static_cast<int>(angles.size()) != n_qubits)
        throw std::invalid_argument("encode: angle count " + std::to_string(angles.size()) +
                                    " does not match qubit count " + std::to_string(n_qubits));
    qsim::StateVector state = qsim::new_state(n_qubits);
    for (int q = 0; q < n_qubits; ++q) qsim::apply_gate(state, qsim::Gate::h(q));
    for (int q = 0; q < n_qubits; ++q) qsim::apply_gate(state, qsim::Gate::ry(q, angles[q]));
    return state;
}

} // namespace qtl::encoding
