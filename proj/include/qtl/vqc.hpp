// Trainable variational circuit.
//
// Each layer applies RX(alpha), RY(beta), RZ(gamma) to every qubit and then
// entangles with a CNOT chain (control q -> target q+1). Per-qubit Pauli-Z
// expectations form the classical output vector. Every gate is a Pauli
// rotation, so derivatives are exact via the parameter-shift rule
//   d z / d p = (z(p + pi/2) - z(p - pi/2)) / 2,
// two full circuit evaluations per parameter. A finite-difference gradient
// is kept alongside as a slower, biased alternative and test oracle.

#pragma once

#include "qtl/encoding.hpp"
#include "qtl/matrix.hpp"
#include "qtl/qsim.hpp"
#include "qtl/rng.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtl::vqc {

/// Count of full VQC state evolutions; the dominant cost of training runs.
inline std::atomic<std::uint64_t> circuit_evaluations{0};

enum class EntanglerTopology { None, Linear, Ring };

inline std::string topology_name(EntanglerTopology t) {
    switch (t) {
    case EntanglerTopology::None: return "none";
    case EntanglerTopology::Linear: return "linear";
    case EntanglerTopology::Ring: return "ring";
    }
    return "linear";
}

inline EntanglerTopology topology_from_name(const std::string& name) {
    if (name == "none") return EntanglerTopology::None;
    if (name == "linear") return EntanglerTopology::Linear;
    if (name == "ring") return EntanglerTopology::Ring;
    throw std::invalid_argument("unknown entangler topology: " + name);
}

struct CircuitParams {
    int n_qubits = 0;
    int n_layers = 0;
    EntanglerTopology topology = EntanglerTopology::Linear;
    std::vector<double> angles; // [layer][qubit][3] row-major; (alpha, beta, gamma) = (RX, RY, RZ)

    int size() const { return n_layers * n_qubits * 3; }

    double& at(int layer, int qubit, int axis) {
        return angles[static_cast<std::size_t>((layer * n_qubits + qubit) * 3 + axis)];
    }
    double at(int layer, int qubit, int axis) const {
        return angles[static_cast<std::size_t>((layer * n_qubits + qubit) * 3 + axis)];
    }

    void validate() const {
        if (n_qubits < 1) throw std::invalid_argument("CircuitParams: n_qubits must be >= 1");
        if (n_layers < 0) throw std::invalid_argument("CircuitParams: n_layers must be >= 0");
        if (static_cast<int>(angles.size()) != size())
            throw std::invalid_argument("CircuitParams: angle tensor has wrong shape");
        for (double a : angles)
            if (!std::isfinite(a)) throw std::invalid_argument("CircuitParams: non-finite angle");
    }

    static CircuitParams zeros(int n_qubits, int n_layers,
                               EntanglerTopology topology = EntanglerTopology::Linear) {
        CircuitParams p;
        p.n_qubits = n_qubits;
        p.n_layers = n_layers;
        p.topology = topology;
        p.angles.assign(static_cast<std::size_t>(p.size()), 0.0);
        return p;
    }

    /// i.i.d. normal(0, stddev) angles; stddev 0.01 is the training default.
    static CircuitParams random_init(int n_qubits, int n_layers, Rng& rng, double stddev = 0.01,
                                     EntanglerTopology topology = EntanglerTopology::Linear) {
        CircuitParams p = zeros(n_qubits, n_layers, topology);
        for (double& a : p.angles) a = rng.normal(0.0, stddev);
        return p;
    }
};

struct MeasurementVector {
    std::vector<double> z; // one <Z_i> per qubit, each in [-1, 1]
};

inline void append_vqc_gates(qsim::Circuit& circuit, const CircuitParams& params) {
    const int n = params.n_qubits;
    for (int layer = 0; layer < params.n_layers; ++layer) {
        for (int q = 0; q < n; ++q) {
            circuit.gates.push_back(qsim::Gate::rx(q, params.at(layer, q, 0)));
            circuit.gates.push_back(qsim::Gate::ry(q, params.at(layer, q, 1)));
            circuit.gates.push_back(qsim::Gate::rz(q, params.at(layer, q, 2)));
        }
        if (params.topology != EntanglerTopology::None) {
            for (int q = 0; q + 1 < n; ++q) circuit.gates.push_back(qsim::Gate::cnot(q, q + 1));
            if (params.topology == EntanglerTopology::Ring && n > 1)
                circuit.gates.push_back(qsim::Gate::cnot(n - 1, 0));
        }
    }
}

inline qsim::StateVector vqc_forward(qsim::StateVector input_state, const CircuitParams& params) {
    if (input_state.n_qubits != params.n_qubits)
        throw std::invalid_argument("vqc_forward: state and parameter qubit counts differ");
    params.validate();
    circuit_evaluations.fetch_add(1, std::memory_order_relaxed);
    qsim::Circuit circuit;
    circuit.n_qubits = params.n_qubits;
    append_vqc_gates(circuit, params);
    return qsim::run_circuit(circuit, std::move(input_state));
}

inline MeasurementVector measure(const qsim::StateVector& state) {
    MeasurementVector m;
    m.z.resize(state.n_qubits);
    for (int q = 0; q < state.n_qubits; ++q) m.z[q] = qsim::expectation_z(state, q);
    return m;
}

/// Full pipeline for one sample: encode(angles_in) -> VQC -> <Z> readout.
inline std::vector<double> forward_z(std::span<const double> angles_in,
                                     const CircuitParams& params) {
    qsim::StateVector state = encoding::encode(angles_in, params.n_qubits);
    state = vqc_forward(std::move(state), params);
    return measure(state).z;
}

/// d z_i / d p_j for every circuit parameter, via the parameter-shift rule.
/// Rows are measured qubits, columns follow the CircuitParams angle layout.
inline Matrix jacobian_param_shift(std::span<const double> angles_in, const CircuitParams& params) {
    const int n_params = params.size();
    Matrix jac(params.n_qubits, n_params);
    CircuitParams shifted = params;
    constexpr double shift = std::numbers::pi / 2;
    for (int j = 0; j < n_params; ++j) {
        const double saved = shifted.angles[j];
        shifted.angles[j] = saved + shift;
        const std::vector<double> plus = forward_z(angles_in, shifted);
        shifted.angles[j] = saved - shift;
        const std::vector<double> minus = forward_z(angles_in, shifted);
        shifted.angles[j] = saved;
        for (int i = 0; i < params.n_qubits; ++i) jac(i, j) = 0.5 * (plus[i] - minus[i]);
    }
    return jac;
}

/// d z_i / d theta_j for the encoding angles (the data-rotation gates are RY,
/// so the same shift rule is exact).
inline Matrix jacobian_wrt_inputs(std::span<const double> angles_in, const CircuitParams& params) {
    const int n_features = static_cast<int>(angles_in.size());
    Matrix jac(params.n_qubits, n_features);
    std::vector<double> shifted(angles_in.begin(), angles_in.end());
    constexpr double shift = std::numbers::pi / 2;
    for (int j = 0; j < n_features; ++j) {
        const double saved = shifted[j];
        shifted[j] = saved + shift;
        const std::vector<double> plus = forward_z(shifted, params);
        shifted[j] = saved - shift;
        const std::vector<double> minus = forward_z(shifted, params);
        shifted[j] = saved;
        for (int i = 0; i < params.n_qubits; ++i) jac(i, j) = 0.5 * (plus[i] - minus[i]);
    }
    return jac;
}

using ScalarFn = std::function<double(const std::vector<double>&)>;

/// Forward difference (f(p + eps e_i) - f(p)) / eps. Biased O(eps).
inline std::vector<double> finite_diff_gradient(const ScalarFn& f, const std::vector<double>& p,
                                                double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_gradient: eps must be positive");
    std::vector<double> grad(p.size());
    const double base = f(p);
    std::vector<double> probe = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
        probe[i] = p[i] + eps;
        grad[i] = (f(probe) - base) / eps;
        probe[i] = p[i];
    }
    return grad;
}

/// Central difference (f(p + eps e_i) - f(p - eps e_i)) / 2 eps; O(eps^2) test oracle.
inline std::vector<double> central_diff_gradient(const ScalarFn& f, const std::vector<double>& p,
                                                 double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("central_diff_gradient: eps must be positive");
    std::vector<double> grad(p.size());
    std::vector<double> probe = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
        probe[i] = p[i] + eps;
        const double hi = f(probe);
        probe[i] = p[i] - eps;
        const double lo = f(probe);
        probe[i] = p[i];
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

} // namespace qtl::vqc
