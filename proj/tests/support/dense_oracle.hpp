#pragma once

// Brute-force dense-matrix circuit oracle for cross-checking the in-place
// statevector kernels. Deliberately written the slow, obvious way: build each
// gate as a full 2^k x 2^k matrix via Kronecker products (qubit 0 = leftmost
// factor = most significant index bit) and multiply it into the state.

#include <complex>
#include <cstddef>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = std::vector<std::vector<cplx>>;
using Vec = std::vector<cplx>;

inline Mat eye(std::size_t n) {
    Mat m(n, std::vector<cplx>(n, cplx{0, 0}));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 1.0;
    return m;
}

inline Mat kron(const Mat& a, const Mat& b) {
    const std::size_t ar = a.size(), ac = a[0].size(), br = b.size(), bc = b[0].size();
    Mat m(ar * br, std::vector<cplx>(ac * bc, cplx{0, 0}));
    for (std::size_t i = 0; i < ar; ++i)
        for (std::size_t j = 0; j < ac; ++j)
            for (std::size_t k = 0; k < br; ++k)
                for (std::size_t l = 0; l < bc; ++l) m[i * br + k][j * bc + l] = a[i][j] * b[k][l];
    return m;
}

inline Mat rx_mat(double theta) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    return {{cplx{c, 0}, cplx{0, -s}}, {cplx{0, -s}, cplx{c, 0}}};
}

inline Mat ry_mat(double theta) {
    const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
    return {{cplx{c, 0}, cplx{-s, 0}}, {cplx{s, 0}, cplx{c, 0}}};
}

inline Mat rz_mat(double theta) {
    return {{std::polar(1.0, -theta / 2.0), cplx{0, 0}}, {cplx{0, 0}, std::polar(1.0, theta / 2.0)}};
}

// Lift a 2x2 gate onto qubit q of a k-qubit register.
inline Mat gate_on(std::size_t k, std::size_t q, const Mat& g) {
    Mat m = (q == 0) ? g : eye(2);
    for (std::size_t i = 1; i < k; ++i) m = kron(m, (i == q) ? g : eye(2));
    return m;
}

// Dense CNOT as an explicit permutation of basis states.
inline Mat cnot_on(std::size_t k, std::size_t control, std::size_t target) {
    const std::size_t n = std::size_t{1} << k;
    const std::size_t cb = std::size_t{1} << (k - 1 - control);
    const std::size_t tb = std::size_t{1} << (k - 1 - target);
    Mat m(n, std::vector<cplx>(n, cplx{0, 0}));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i & cb) ? (i ^ tb) : i;
        m[j][i] = 1.0;
    }
    return m;
}

inline Vec mat_vec(const Mat& m, const Vec& v) {
    Vec out(m.size(), cplx{0, 0});
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
    return out;
}

inline Vec zero_state(std::size_t k) {
    Vec v(std::size_t{1} << k, cplx{0, 0});
    v[0] = 1.0;
    return v;
}

// Full circuit mirror: angle encoding, then per layer RY rotations, ring
// CNOTs, auxiliary CNOT, auxiliary RY. theta is [layers x (n_main+1)] row-major.
inline Vec run_dense_circuit(std::size_t n_main, std::size_t n_layers,
                             const std::vector<double>& theta,
                             const std::vector<double>& features) {
    const std::size_t k = n_main + 1;
    Vec v = zero_state(k);
    for (std::size_t j = 0; j < n_main; ++j) v = mat_vec(gate_on(k, j, rx_mat(features[j])), v);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const double* ang = theta.data() + l * (n_main + 1);
        for (std::size_t j = 0; j < n_main; ++j) v = mat_vec(gate_on(k, j, ry_mat(ang[j])), v);
        if (n_main > 1)  // a one-qubit ring has no entangling edges
            for (std::size_t i = 0; i < n_main; ++i)
                v = mat_vec(cnot_on(k, i, (i + 1) % n_main), v);
        v = mat_vec(cnot_on(k, n_main - 1, n_main), v);
        v = mat_vec(gate_on(k, n_main, ry_mat(ang[n_main])), v);
    }
    return v;
}

inline double z_expectation(const Vec& v, std::size_t k, std::size_t q) {
    const std::size_t mask = std::size_t{1} << (k - 1 - q);
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        e += (i & mask) ? -std::norm(v[i]) : std::norm(v[i]);
    return e;
}

}  // namespace oracle
