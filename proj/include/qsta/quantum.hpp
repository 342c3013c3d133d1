#pragma once

// Exact statevector simulation of the parameterized circuit used by the
// quantum encoder layer: angle encoding on the main register, RY variational
// layers with ring entanglement plus one auxiliary qubit, Pauli-Z readout on
// the main qubits, and analytic parameter-shift gradients.
//
// Bit convention: qubit 0 is the most significant bit of the amplitude index,
// so basis state |b0 b1 ... b_{k-1}> lives at index (b0 << (k-1)) | ... | b_{k-1}.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsta::quantum {

using cplx = std::complex<double>;

class StateVector {
public:
    explicit StateVector(std::size_t n_total) : n_(n_total), amps_(std::size_t{1} << n_total) {
        amps_[0] = 1.0;
    }

    std::size_t n_qubits() const { return n_; }
    const std::vector<cplx>& amps() const { return amps_; }
    std::vector<cplx>& amps() { return amps_; }

    void reset() {
        std::fill(amps_.begin(), amps_.end(), cplx{0.0, 0.0});
        amps_[0] = 1.0;
    }

    double norm_sq() const {
        double s = 0.0;
        for (const auto& a : amps_) s += std::norm(a);
        return s;
    }

    void apply_rx(std::size_t q, double theta) {
        const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
        apply_single(q, cplx{c, 0.0}, cplx{0.0, -s}, cplx{0.0, -s}, cplx{c, 0.0});
    }

    void apply_ry(std::size_t q, double theta) {
        const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
        apply_single(q, cplx{c, 0.0}, cplx{-s, 0.0}, cplx{s, 0.0}, cplx{c, 0.0});
    }

    void apply_rz(std::size_t q, double theta) {
        const cplx e0 = std::polar(1.0, -theta / 2.0), e1 = std::polar(1.0, theta / 2.0);
        apply_single(q, e0, cplx{0.0, 0.0}, cplx{0.0, 0.0}, e1);
    }

    void apply_cnot(std::size_t control, std::size_t target) {
        check_qubit(control, "cnot control");
        check_qubit(target, "cnot target");
        if (control == target)
            throw std::invalid_argument("cnot: control and target are both qubit " +
                                        std::to_string(control));
        const std::size_t cb = bit_mask(control), tb = bit_mask(target);
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            if ((i & cb) && !(i & tb)) std::swap(amps_[i], amps_[i | tb]);
        }
    }

    // <Z_q> = sum over basis states of (+1 if bit q is 0 else -1) |amp|^2.
    double z_expectation(std::size_t q) const {
        check_qubit(q, "z_expectation");
        const std::size_t mask = bit_mask(q);
        double e = 0.0;
        for (std::size_t i = 0; i < amps_.size(); ++i)
            e += (i & mask) ? -std::norm(amps_[i]) : std::norm(amps_[i]);
        return e;
    }

private:
    std::size_t bit_mask(std::size_t q) const { return std::size_t{1} << (n_ - 1 - q); }

    void check_qubit(std::size_t q, const char* op) const {
        if (q >= n_)
            throw std::out_of_range(std::string(op) + ": qubit " + std::to_string(q) +
                                    " out of range for " + std::to_string(n_) + "-qubit register");
    }

    // Apply [[u00,u01],[u10,u11]] to qubit q over paired amplitudes.
    void apply_single(std::size_t q, cplx u00, cplx u01, cplx u10, cplx u11) {
        check_qubit(q, "rotation");
        const std::size_t stride = bit_mask(q);
        for (std::size_t base = 0; base < amps_.size(); base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                const cplx a0 = amps_[i], a1 = amps_[i + stride];
                amps_[i] = u00 * a0 + u01 * a1;
                amps_[i + stride] = u10 * a0 + u11 * a1;
            }
        }
    }

    std::size_t n_;
    std::vector<cplx> amps_;
};

struct CircuitSpec {
    std::size_t n_qubits = 4;  // main register; total register adds one auxiliary
    std::size_t n_layers = 4;
    std::string encoding = "angle";
    std::string entanglement = "ring_aux";

    std::size_t total_qubits() const { return n_qubits + 1; }
    std::size_t n_params() const { return n_layers * (n_qubits + 1); }
};

// Rotation angles, [n_layers x (n_qubits + 1)] row-major; the last column is
// the auxiliary-qubit angle of each layer.
struct CircuitParams {
    std::size_t n_layers = 0;
    std::size_t n_cols = 0;  // n_qubits + 1
    std::vector<double> theta;

    CircuitParams() = default;
    CircuitParams(std::size_t layers, std::size_t cols)
        : n_layers(layers), n_cols(cols), theta(layers * cols, 0.0) {}

    double& at(std::size_t l, std::size_t j) { return theta[l * n_cols + j]; }
    double at(std::size_t l, std::size_t j) const { return theta[l * n_cols + j]; }
};

// RX(feature_j) on each main qubit j; the auxiliary qubit is untouched.
inline void angle_encode(StateVector& state, const std::vector<double>& features,
                         std::size_t n_main) {
    if (features.size() != n_main)
        throw std::invalid_argument("angle_encode: got " + std::to_string(features.size()) +
                                    " features for " + std::to_string(n_main) + " main qubits");
    for (std::size_t j = 0; j < n_main; ++j) state.apply_rx(j, features[j]);
}

// One variational layer: RY on each main qubit, ring CNOTs, CNOT into the
// auxiliary qubit, RY on the auxiliary. angles has n_main + 1 entries.
inline void variational_layer(StateVector& state, const double* angles, std::size_t n_main) {
    for (std::size_t j = 0; j < n_main; ++j) state.apply_ry(j, angles[j]);
    if (n_main > 1)  // a one-qubit ring has no entangling edges
        for (std::size_t i = 0; i < n_main; ++i) state.apply_cnot(i, (i + 1) % n_main);
    state.apply_cnot(n_main - 1, n_main);
    state.apply_ry(n_main, angles[n_main]);
}

// Fresh |0...0> -> encode -> layers -> <Z_j> on main qubits. Pure function.
inline std::vector<double> run_circuit(const CircuitSpec& spec, const CircuitParams& params,
                                       const std::vector<double>& features) {
    if (params.n_layers != spec.n_layers || params.n_cols != spec.n_qubits + 1)
        throw std::invalid_argument("run_circuit: params shape [" +
                                    std::to_string(params.n_layers) + "x" +
                                    std::to_string(params.n_cols) + "] does not match spec");
    StateVector state(spec.total_qubits());
    angle_encode(state, features, spec.n_qubits);
    for (std::size_t l = 0; l < spec.n_layers; ++l)
        variational_layer(state, params.theta.data() + l * params.n_cols, spec.n_qubits);
    std::vector<double> out(spec.n_qubits);
    for (std::size_t j = 0; j < spec.n_qubits; ++j) out[j] = state.z_expectation(j);
    return out;
}

// Parameter-shift jacobians. All gates are half-angle rotations, so for every
// angle phi (trainable or encoded input):
//   d<Z_j>/dphi = (<Z_j>(phi + pi/2) - <Z_j>(phi - pi/2)) / 2
struct CircuitJacobian {
    std::size_t n_out = 0;       // n_qubits
    std::size_t n_theta = 0;     // n_layers * (n_qubits + 1)
    std::size_t n_features = 0;  // n_qubits
    std::vector<double> d_theta;     // [n_theta x n_out] row-major
    std::vector<double> d_features;  // [n_features x n_out] row-major
};

namespace detail {
constexpr double kShift = 1.5707963267948966;  // pi/2
}

inline CircuitJacobian circuit_jacobian(const CircuitSpec& spec, const CircuitParams& params,
                                        const std::vector<double>& features,
                                        bool want_theta = true, bool want_features = true) {
    CircuitJacobian jac;
    jac.n_out = spec.n_qubits;
    jac.n_theta = params.theta.size();
    jac.n_features = features.size();
    if (want_theta) {
        jac.d_theta.assign(jac.n_theta * jac.n_out, 0.0);
        CircuitParams shifted = params;
        for (std::size_t p = 0; p < jac.n_theta; ++p) {
            const double saved = shifted.theta[p];
            shifted.theta[p] = saved + detail::kShift;
            const auto plus = run_circuit(spec, shifted, features);
            shifted.theta[p] = saved - detail::kShift;
            const auto minus = run_circuit(spec, shifted, features);
            shifted.theta[p] = saved;
            for (std::size_t j = 0; j < jac.n_out; ++j)
                jac.d_theta[p * jac.n_out + j] = 0.5 * (plus[j] - minus[j]);
        }
    }
    if (want_features) {
        jac.d_features.assign(jac.n_features * jac.n_out, 0.0);
        std::vector<double> shifted = features;
        for (std::size_t p = 0; p < jac.n_features; ++p) {
            const double saved = shifted[p];
            shifted[p] = saved + detail::kShift;
            const auto plus = run_circuit(spec, params, shifted);
            shifted[p] = saved - detail::kShift;
            const auto minus = run_circuit(spec, params, shifted);
            shifted[p] = saved;
            for (std::size_t j = 0; j < jac.n_out; ++j)
                jac.d_features[p * jac.n_out + j] = 0.5 * (plus[j] - minus[j]);
        }
    }
    return jac;
}

}  // namespace qsta::quantum
