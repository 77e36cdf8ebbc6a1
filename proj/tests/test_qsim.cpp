#include <catch2/catch_amalgamated.hpp>

#include "qtl/qsim.hpp"
#include "qtl/rng.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace qtl;
using namespace qtl::qsim;

namespace {

Circuit random_circuit(Rng& rng, int n_qubits, int n_gates) {
    Circuit circuit;
    circuit.n_qubits = n_qubits;
    for (int g = 0; g < n_gates; ++g) {
        const int kind = static_cast<int>(rng.below(5));
        const int target = static_cast<int>(rng.below(n_qubits));
        const double angle = rng.uniform(-3.2, 3.2);
        switch (kind) {
        case 0: circuit.gates.push_back(Gate::h(target)); break;
        case 1: circuit.gates.push_back(Gate::rx(target, angle)); break;
        case 2: circuit.gates.push_back(Gate::ry(target, angle)); break;
        case 3: circuit.gates.push_back(Gate::rz(target, angle)); break;
        default: {
            if (n_qubits < 2) {
                circuit.gates.push_back(Gate::h(target));
                break;
            }
            int control = static_cast<int>(rng.below(n_qubits));
            while (control == target) control = static_cast<int>(rng.below(n_qubits));
            circuit.gates.push_back(Gate::cnot(control, target));
            break;
        }
        }
    }
    return circuit;
}

StateVector random_state(Rng& rng, int n_qubits) {
    StateVector state = new_state(n_qubits);
    double norm = 0.0;
    for (c64& a : state.amplitudes) {
        a = c64{rng.normal(), rng.normal()};
        norm += std::norm(a);
    }
    const double scale = 1.0 / std::sqrt(norm);
    for (c64& a : state.amplitudes) a *= scale;
    return state;
}

double max_amplitude_diff(const StateVector& a, const StateVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
        worst = std::max(worst, std::abs(a.amplitudes[i] - b.amplitudes[i]));
    return worst;
}

} // namespace

TEST_CASE("new_state produces |0...0>") {
    const StateVector one = new_state(1);
    REQUIRE(one.amplitudes.size() == 2);
    CHECK(one.amplitudes[0] == c64{1.0, 0.0});
    CHECK(one.amplitudes[1] == c64{0.0, 0.0});

    const StateVector two = new_state(2);
    REQUIRE(two.amplitudes.size() == 4);
    CHECK(two.amplitudes[0] == c64{1.0, 0.0});
    for (std::size_t i = 1; i < 4; ++i) CHECK(two.amplitudes[i] == c64{0.0, 0.0});

    const StateVector six = new_state(6);
    REQUIRE(six.amplitudes.size() == 64);
    CHECK(six.amplitudes[0] == c64{1.0, 0.0});
}

TEST_CASE("new_state rejects out-of-range sizes") {
    CHECK_THROWS_AS(new_state(0), std::invalid_argument);
    CHECK_THROWS_AS(new_state(-3), std::invalid_argument);
    CHECK_THROWS_AS(new_state(11), std::invalid_argument);
}

TEST_CASE("Hadamard on |0> gives the equal superposition") {
    StateVector state = new_state(1);
    apply_gate(state, Gate::h(0));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(state.amplitudes[0] - c64{inv_sqrt2, 0}) < 1e-15);
    CHECK(std::abs(state.amplitudes[1] - c64{inv_sqrt2, 0}) < 1e-15);
}

TEST_CASE("RY(pi) flips |0> to |1>") {
    StateVector state = new_state(1);
    apply_gate(state, Gate::ry(0, std::numbers::pi));
    CHECK(std::abs(state.amplitudes[0]) < 1e-15);
    CHECK(std::abs(state.amplitudes[1] - c64{1, 0}) < 1e-15);
}

TEST_CASE("CNOT truth table") {
    // |q1 q0> = |01> (control qubit 0 set) -> target qubit 1 flips -> |11>
    StateVector state = new_state(2);
    state.amplitudes[0] = c64{0, 0};
    state.amplitudes[1] = c64{1, 0};
    apply_gate(state, Gate::cnot(0, 1));
    CHECK(std::abs(state.amplitudes[3] - c64{1, 0}) < 1e-15);
    CHECK(std::abs(state.amplitudes[1]) < 1e-15);

    // control clear: nothing happens
    StateVector untouched = new_state(2);
    apply_gate(untouched, Gate::cnot(0, 1));
    CHECK(untouched.amplitudes[0] == c64{1, 0});
}

TEST_CASE("gate index errors") {
    StateVector state = new_state(2);
    CHECK_THROWS_AS(apply_gate(state, Gate::h(2)), std::out_of_range);
    CHECK_THROWS_AS(apply_gate(state, Gate::cnot(3, 0)), std::out_of_range);
    CHECK_THROWS_AS(apply_gate(state, Gate::cnot(1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(expectation_z(state, 2), std::out_of_range);
    CHECK_THROWS_AS(expectation_z(state, -1), std::out_of_range);
}

TEST_CASE("expectation_z on basis and superposition states") {
    StateVector zero = new_state(1);
    CHECK(expectation_z(zero, 0) == Catch::Approx(1.0));

    StateVector one = new_state(1);
    apply_gate(one, Gate::ry(0, std::numbers::pi));
    CHECK(expectation_z(one, 0) == Catch::Approx(-1.0));

    StateVector plus = new_state(1);
    apply_gate(plus, Gate::h(0));
    CHECK(expectation_z(plus, 0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("run_circuit applies gates in order") {
    const StateVector initial = new_state(3);

    Circuit empty;
    empty.n_qubits = 3;
    const StateVector same = run_circuit(empty, initial);
    CHECK(max_amplitude_diff(same, initial) == 0.0);

    Circuit twice;
    twice.n_qubits = 3;
    twice.gates = {Gate::h(1), Gate::h(1)};
    const StateVector back = run_circuit(twice, initial);
    CHECK(max_amplitude_diff(back, initial) < 1e-15);

    Circuit mismatched;
    mismatched.n_qubits = 2;
    CHECK_THROWS_AS(run_circuit(mismatched, initial), std::invalid_argument);
}

TEST_CASE("oracle identity and single-gate matrices") {
    Circuit empty;
    empty.n_qubits = 2;
    const UnitaryMatrix id = circuit_unitary_oracle(empty);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(std::abs(id.at(r, c) - (r == c ? c64{1, 0} : c64{0, 0})) < 1e-15);

    Circuit h;
    h.n_qubits = 1;
    h.gates = {Gate::h(0)};
    const UnitaryMatrix hm = circuit_unitary_oracle(h);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(hm.at(0, 0) - c64{inv_sqrt2, 0}) < 1e-15);
    CHECK(std::abs(hm.at(0, 1) - c64{inv_sqrt2, 0}) < 1e-15);
    CHECK(std::abs(hm.at(1, 0) - c64{inv_sqrt2, 0}) < 1e-15);
    CHECK(std::abs(hm.at(1, 1) + c64{inv_sqrt2, 0}) < 1e-15);

    Circuit too_big;
    too_big.n_qubits = 9;
    CHECK_THROWS_AS(circuit_unitary_oracle(too_big), std::invalid_argument);
}

TEST_CASE("random circuits match the dense oracle") {
    Rng rng(0x5eed01);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const int gates = 1 + static_cast<int>(rng.below(8));
        const Circuit circuit = random_circuit(rng, n, gates);

        const StateVector kernel = run_circuit(circuit, new_state(n));
        const StateVector dense = apply_unitary(circuit_unitary_oracle(circuit), new_state(n));

        CHECK(max_amplitude_diff(kernel, dense) <= 1e-10);
        CHECK(std::abs(norm_squared(kernel) - 1.0) <= 1e-12);
    }
}

TEST_CASE("oracle unitarity: U Udag = I") {
    Rng rng(0x5eed02);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const Circuit circuit = random_circuit(rng, n, 6);
        const UnitaryMatrix u = circuit_unitary_oracle(circuit);
        const std::size_t dim = u.dim;
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) {
                c64 acc{0, 0};
                for (std::size_t k = 0; k < dim; ++k) acc += u.at(r, k) * std::conj(u.at(c, k));
                const c64 expected = (r == c) ? c64{1, 0} : c64{0, 0};
                CHECK(std::abs(acc - expected) <= 1e-10);
            }
    }
}

TEST_CASE("RY(theta) RY(-theta) is the identity on random states") {
    Rng rng(0x5eed03);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(5));
        const int target = static_cast<int>(rng.below(n));
        const double theta = rng.uniform(-6.3, 6.3);
        const StateVector original = random_state(rng, n);
        StateVector state = original;
        apply_gate(state, Gate::ry(target, theta));
        apply_gate(state, Gate::ry(target, -theta));
        CHECK(max_amplitude_diff(state, original) <= 1e-12);
    }
}

TEST_CASE("expectation_z range and X-flip antisymmetry") {
    Rng rng(0x5eed04);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(5));
        const int qubit = static_cast<int>(rng.below(n));
        const StateVector state = random_state(rng, n);
        const double z = expectation_z(state, qubit);
        CHECK(z >= -1.0 - 1e-12);
        CHECK(z <= 1.0 + 1e-12);

        // RX(pi) = -iX; the global phase cancels in |a|^2
        StateVector flipped = state;
        apply_gate(flipped, Gate::rx(qubit, std::numbers::pi));
        CHECK(expectation_z(flipped, qubit) == Catch::Approx(-z).margin(1e-12));
    }
}

TEST_CASE("norm is preserved by long random gate sequences") {
    Rng rng(0x5eed05);
    StateVector state = new_state(6);
    const Circuit circuit = random_circuit(rng, 6, 400);
    state = run_circuit(circuit, std::move(state));
    CHECK(std::abs(norm_squared(state) - 1.0) <= 1e-12);
}
