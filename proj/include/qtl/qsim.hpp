// Dense statevector simulator.
//
// Convention used throughout: qubit 0 is the least significant bit of the
// amplitude index, so |q_{n-1} ... q_1 q_0> lives at index sum q_k 2^k.
// Gates are applied in place by updating amplitude pairs selected with a
// bitmask stride. Expectations are exact (no sampling).
//
// Gate matrices:
//   H       = (1/sqrt 2) [[1, 1], [1, -1]]
//   RX(t)   = [[cos t/2, -i sin t/2], [-i sin t/2, cos t/2]]
//   RY(t)   = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]
//   RZ(t)   = diag(e^{-it/2}, e^{+it/2})
//   CNOT    = flips the target bit where the control bit is 1

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtl::qsim {

using c64 = std::complex<double>;

inline constexpr int kMaxQubits = 10;
inline constexpr int kMaxOracleQubits = 8;

struct StateVector {
    int n_qubits = 0;
    std::vector<c64> amplitudes;

    std::size_t dim() const { return amplitudes.size(); }
};

/// |0...0> on n_qubits qubits. 1 <= n_qubits <= 10.
inline StateVector new_state(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::invalid_argument("new_state: n_qubits must be in [1, " +
                                    std::to_string(kMaxQubits) + "], got " +
                                    std::to_string(n_qubits));
    StateVector state;
    state.n_qubits = n_qubits;
    state.amplitudes.assign(std::size_t{1} << n_qubits, c64{0.0, 0.0});
    state.amplitudes[0] = c64{1.0, 0.0};
    return state;
}

enum class GateKind { H, RX, RY, RZ, CNOT };

struct Gate {
    GateKind kind = GateKind::H;
    int target = 0;
    int control = -1;  // CNOT only, -1 otherwise
    double angle = 0.0; // rotation gates only

    static Gate h(int target) { return {GateKind::H, target, -1, 0.0}; }
    static Gate rx(int target, double angle) { return {GateKind::RX, target, -1, angle}; }
    static Gate ry(int target, double angle) { return {GateKind::RY, target, -1, angle}; }
    static Gate rz(int target, double angle) { return {GateKind::RZ, target, -1, angle}; }
    static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control, 0.0}; }
};

struct Circuit {
    int n_qubits = 0;
    std::vector<Gate> gates;
};

namespace detail {

inline void check_qubit(const StateVector& state, int qubit, const char* what) {
    if (qubit < 0 || qubit >= state.n_qubits)
        throw std::out_of_range(std::string(what) + " qubit index " + std::to_string(qubit) +
                                " out of range for " + std::to_string(state.n_qubits) + " qubits");
}

/// In-place 2x2 unitary on the target qubit: pairs (i0, i0|mask).
inline void apply_1q(StateVector& state, int target, c64 u00, c64 u01, c64 u10, c64 u11) {
    const std::uint64_t mask = std::uint64_t{1} << target;
    const std::uint64_t low = mask - 1;
    const std::uint64_t half = state.dim() >> 1;
    c64* amp = state.amplitudes.data();
    for (std::uint64_t k = 0; k < half; ++k) {
        const std::uint64_t i0 = ((k & ~low) << 1) | (k & low);
        const std::uint64_t i1 = i0 | mask;
        const c64 a = amp[i0];
        const c64 b = amp[i1];
        amp[i0] = u00 * a + u01 * b;
        amp[i1] = u10 * a + u11 * b;
    }
}

} // namespace detail

inline void apply_gate(StateVector& state, const Gate& gate) {
    detail::check_qubit(state, gate.target, "target");
    switch (gate.kind) {
    case GateKind::H: {
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        detail::apply_1q(state, gate.target, {inv_sqrt2, 0}, {inv_sqrt2, 0}, {inv_sqrt2, 0},
                         {-inv_sqrt2, 0});
        return;
    }
    case GateKind::RX: {
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        detail::apply_1q(state, gate.target, {c, 0}, {0, -s}, {0, -s}, {c, 0});
        return;
    }
    case GateKind::RY: {
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        detail::apply_1q(state, gate.target, {c, 0}, {-s, 0}, {s, 0}, {c, 0});
        return;
    }
    case GateKind::RZ: {
        const c64 e0 = std::exp(c64{0, -gate.angle / 2.0});
        const c64 e1 = std::exp(c64{0, gate.angle / 2.0});
        detail::apply_1q(state, gate.target, e0, {0, 0}, {0, 0}, e1);
        return;
    }
    case GateKind::CNOT: {
        detail::check_qubit(state, gate.control, "control");
        if (gate.control == gate.target)
            throw std::invalid_argument("CNOT: control and target must differ");
        const std::uint64_t cmask = std::uint64_t{1} << gate.control;
        const std::uint64_t tmask = std::uint64_t{1} << gate.target;
        c64* amp = state.amplitudes.data();
        const std::uint64_t dim = state.dim();
        for (std::uint64_t i = 0; i < dim; ++i) {
            if ((i & cmask) != 0 && (i & tmask) == 0) std::swap(amp[i], amp[i | tmask]);
        }
        return;
    }
    }
    throw std::invalid_argument("apply_gate: unknown gate kind");
}

/// <Z_qubit> = sum_k (+1 if bit is 0 else -1) |a_k|^2, in [-1, 1].
inline double expectation_z(const StateVector& state, int qubit) {
    detail::check_qubit(state, qubit, "measured");
    const std::uint64_t mask = std::uint64_t{1} << qubit;
    double acc = 0.0;
    for (std::uint64_t i = 0; i < state.dim(); ++i) {
        const double p = std::norm(state.amplitudes[i]);
        acc += (i & mask) ? -p : p;
    }
    return acc;
}

inline double norm_squared(const StateVector& state) {
    double acc = 0.0;
    for (const c64& a : state.amplitudes) acc += std::norm(a);
    return acc;
}

inline StateVector run_circuit(const Circuit& circuit, StateVector initial) {
    if (circuit.n_qubits != initial.n_qubits)
        throw std::invalid_argument("run_circuit: circuit and state qubit counts differ");
    for (const Gate& gate : circuit.gates) apply_gate(initial, gate);
    return initial;
}

// ---------------------------------------------------------------------------
// Dense-unitary oracle. Builds every gate as a full 2^n x 2^n matrix by
// Kronecker embedding and multiplies them in order. Quadratically more work
// than the kernels above; intended for verification, n_qubits <= 8.

struct UnitaryMatrix {
    std::size_t dim = 0;
    std::vector<c64> data; // row-major

    c64& at(std::size_t r, std::size_t c) { return data[r * dim + c]; }
    c64 at(std::size_t r, std::size_t c) const { return data[r * dim + c]; }

    static UnitaryMatrix identity(std::size_t dim) {
        UnitaryMatrix m;
        m.dim = dim;
        m.data.assign(dim * dim, c64{0, 0});
        for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = c64{1, 0};
        return m;
    }
};

namespace detail {

inline UnitaryMatrix kron(const UnitaryMatrix& a, const UnitaryMatrix& b) {
    UnitaryMatrix out;
    out.dim = a.dim * b.dim;
    out.data.assign(out.dim * out.dim, c64{0, 0});
    for (std::size_t ar = 0; ar < a.dim; ++ar)
        for (std::size_t ac = 0; ac < a.dim; ++ac) {
            const c64 f = a.at(ar, ac);
            if (f == c64{0, 0}) continue;
            for (std::size_t br = 0; br < b.dim; ++br)
                for (std::size_t bc = 0; bc < b.dim; ++bc)
                    out.at(ar * b.dim + br, ac * b.dim + bc) = f * b.at(br, bc);
        }
    return out;
}

inline UnitaryMatrix matmul(const UnitaryMatrix& a, const UnitaryMatrix& b) {
    UnitaryMatrix out;
    out.dim = a.dim;
    out.data.assign(out.dim * out.dim, c64{0, 0});
    for (std::size_t r = 0; r < a.dim; ++r)
        for (std::size_t k = 0; k < a.dim; ++k) {
            const c64 f = a.at(r, k);
            if (f == c64{0, 0}) continue;
            for (std::size_t c = 0; c < a.dim; ++c) out.at(r, c) += f * b.at(k, c);
        }
    return out;
}

inline UnitaryMatrix two_by_two(c64 u00, c64 u01, c64 u10, c64 u11) {
    UnitaryMatrix m;
    m.dim = 2;
    m.data = {u00, u01, u10, u11};
    return m;
}

/// I_{2^(n-1-q)} (x) U (x) I_{2^q}  -- qubit 0 is the LSB, so it sits rightmost.
inline UnitaryMatrix embed_1q(const UnitaryMatrix& u, int qubit, int n_qubits) {
    const UnitaryMatrix below = UnitaryMatrix::identity(std::size_t{1} << qubit);
    const UnitaryMatrix above = UnitaryMatrix::identity(std::size_t{1} << (n_qubits - 1 - qubit));
    return kron(above, kron(u, below));
}

inline UnitaryMatrix gate_matrix(const Gate& gate, int n_qubits) {
    switch (gate.kind) {
    case GateKind::H: {
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        return embed_1q(two_by_two({inv_sqrt2, 0}, {inv_sqrt2, 0}, {inv_sqrt2, 0}, {-inv_sqrt2, 0}),
                        gate.target, n_qubits);
    }
    case GateKind::RX: {
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        return embed_1q(two_by_two({c, 0}, {0, -s}, {0, -s}, {c, 0}), gate.target, n_qubits);
    }
    case GateKind::RY: {
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        return embed_1q(two_by_two({c, 0}, {-s, 0}, {s, 0}, {c, 0}), gate.target, n_qubits);
    }
    case GateKind::RZ: {
        const c64 e0 = std::exp(c64{0, -gate.angle / 2.0});
        const c64 e1 = std::exp(c64{0, gate.angle / 2.0});
        return embed_1q(two_by_two(e0, {0, 0}, {0, 0}, e1), gate.target, n_qubits);
    }
    case GateKind::CNOT: {
        // CNOT = |0><0|_c (x) I + |1><1|_c (x) X_t
        const UnitaryMatrix p0 = embed_1q(two_by_two({1, 0}, {0, 0}, {0, 0}, {0, 0}), gate.control,
                                          n_qubits);
        const UnitaryMatrix p1 = embed_1q(two_by_two({0, 0}, {0, 0}, {0, 0}, {1, 0}), gate.control,
                                          n_qubits);
        const UnitaryMatrix x = embed_1q(two_by_two({0, 0}, {1, 0}, {1, 0}, {0, 0}), gate.target,
                                         n_qubits);
        UnitaryMatrix out = matmul(x, p1);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += p0.data[i];
        return out;
    }
    }
    throw std::invalid_argument("gate_matrix: unknown gate kind");
}

} // namespace detail

inline UnitaryMatrix circuit_unitary_oracle(const Circuit& circuit) {
    if (circuit.n_qubits < 1 || circuit.n_qubits > kMaxOracleQubits)
        throw std::invalid_argument("circuit_unitary_oracle: n_qubits must be in [1, " +
                                    std::to_string(kMaxOracleQubits) + "]");
    UnitaryMatrix total = UnitaryMatrix::identity(std::size_t{1} << circuit.n_qubits);
    for (const Gate& gate : circuit.gates) {
        for (int q : {gate.target, gate.control})
            if (q >= circuit.n_qubits)
                throw std::out_of_range("circuit_unitary_oracle: gate index out of range");
        total = detail::matmul(detail::gate_matrix(gate, circuit.n_qubits), total);
    }
    return total;
}

/// Matrix-vector product for oracle cross-checks.
inline StateVector apply_unitary(const UnitaryMatrix& u, const StateVector& state) {
    if (u.dim != state.dim())
        throw std::invalid_argument("apply_unitary: dimension mismatch");
    StateVector out = state;
    for (std::size_t r = 0; r < u.dim; ++r) {
        c64 acc{0, 0};
        for (std::size_t c = 0; c < u.dim; ++c) acc += u.at(r, c) * state.amplitudes[c];
        out.amplitudes[r] = acc;
    }
    return out;
}

} // namespace qtl::qsim
