#pragma once

#include <array>
#include <complex>
#include <string>

#include <Eigen/Dense>

namespace fbent {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Ket4 = Eigen::Vector4cd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kPsdTolerance = -1e-10;

// Density matrix over the frequency-bin basis, signal-major:
// index 0 = |0s 0i>, 1 = |0s 1i>, 2 = |1s 0i>, 3 = |1s 1i>.
class TwoQubitState {
public:
    // Throws std::invalid_argument unless m is Hermitian, unit-trace and PSD.
    static TwoQubitState from_matrix(const Matrix4& m);
    // Normalizes the ket; throws on a zero vector.
    static TwoQubitState from_ket(const Ket4& ket);
    static TwoQubitState maximally_mixed();

    const Matrix4& matrix() const noexcept { return rho_; }
    Complex operator()(int row, int col) const { return rho_(row, col); }

private:
    explicit TwoQubitState(const Matrix4& m) : rho_(m) {}
    Matrix4 rho_;
};

struct Observable {
    Matrix4 matrix;
    std::string label;

    // Throws std::invalid_argument if the matrix is not Hermitian.
    static Observable make(const Matrix4& m, std::string label);
};

struct ProjectorWithEfficiency {
    Matrix4 matrix;
    double efficiency = 1.0;
};

enum class Pauli { I, X, Y, Z };

Matrix2 pauli(Pauli p);
// cos(phi) X + sin(phi) Y: +1 eigenvector (|0> + e^{i phi}|1>)/sqrt2.
Matrix2 equatorial_pauli(double phi);
Matrix4 kron(const Matrix2& a, const Matrix2& b);
Observable pauli_product(Pauli signal, Pauli idler);

// (|00> + e^{i theta}|11>)/sqrt2.
TwoQubitState bell_state(double theta);

// Rank-1 projector onto (|0>+e^{i phi_s}|1>)(|0>+e^{i phi_i}|1>)/2 with
// efficiency exp(-gamma |dt|). Throws std::invalid_argument for gamma <= 0.
ProjectorWithEfficiency equatorial_projector(double phi_s, double phi_i, double gamma, double dt);

double expectation(const TwoQubitState& state, const Observable& obs);
double expectation(const TwoQubitState& state, const Matrix4& op);
// efficiency * Tr(rho Pi)
double detection_probability(const TwoQubitState& state, const ProjectorWithEfficiency& proj);

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const TwoQubitState& rho, const TwoQubitState& target);
double purity(const TwoQubitState& rho);
double min_eigenvalue(const Matrix4& hermitian);

// Joint outcome probabilities for +/-1 observables on each side; index 0 is the
// +1 outcome (|0> for Z), index 1 the -1 outcome.
using JointProbabilities = std::array<std::array<double, 2>, 2>;
JointProbabilities joint_probabilities(const TwoQubitState& state, const Matrix2& signal_obs,
                                       const Matrix2& idler_obs);

// CHSH combination |<A0B0> + <A0B1> + <A1B0> - <A1B1>| for A0=X, A1=Y,
// B0=(X-Y)/sqrt2, B1=(X+Y)/sqrt2.
double chsh_value(const TwoQubitState& state);

} // namespace fbent
