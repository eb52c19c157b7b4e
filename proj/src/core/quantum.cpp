#include "fbent/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fbent {
namespace {

double hermiticity_defect(const Matrix4& m)
{
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Matrix4 hermitian_sqrt(const Matrix4& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix4> es(m);
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace

TwoQubitState TwoQubitState::from_matrix(const Matrix4& m)
{
    if (!m.allFinite())
        throw std::invalid_argument("density matrix has non-finite entries");
    if (hermiticity_defect(m) > kHermitianTolerance)
        throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(m.trace() - Complex(1.0, 0.0)) > kTraceTolerance)
        throw std::invalid_argument("density matrix trace is not 1");
    if (min_eigenvalue(m) < kPsdTolerance)
        throw std::invalid_argument("density matrix is not positive semidefinite");
    return TwoQubitState(m);
}

TwoQubitState TwoQubitState::from_ket(const Ket4& ket)
{
    const double n = ket.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("cannot normalize a zero ket");
    const Ket4 psi = ket / n;
    Matrix4 rho = psi * psi.adjoint();
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return TwoQubitState(rho);
}

TwoQubitState TwoQubitState::maximally_mixed()
{
    return TwoQubitState(Matrix4::Identity() * 0.25);
}

Observable Observable::make(const Matrix4& m, std::string label)
{
    if (hermiticity_defect(m) > kHermitianTolerance)
        throw std::invalid_argument("observable '" + label + "' is not Hermitian");
    return Observable{m, std::move(label)};
}

Matrix2 pauli(Pauli p)
{
    Matrix2 m;
    switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
    }
    return m;
}

Matrix2 equatorial_pauli(double phi)
{
    return std::cos(phi) * pauli(Pauli::X) + std::sin(phi) * pauli(Pauli::Y);
}

Matrix4 kron(const Matrix2& a, const Matrix2& b)
{
    Matrix4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

Observable pauli_product(Pauli signal, Pauli idler)
{
    static constexpr char names[] = {'I', 'X', 'Y', 'Z'};
    std::string label{names[static_cast<int>(signal)], names[static_cast<int>(idler)]};
    return Observable{kron(pauli(signal), pauli(idler)), std::move(label)};
}

TwoQubitState bell_state(double theta)
{
    Ket4 psi = Ket4::Zero();
    psi(0) = 1.0;
    psi(3) = std::polar(1.0, theta);
    return TwoQubitState::from_ket(psi);
}

ProjectorWithEfficiency equatorial_projector(double phi_s, double phi_i, double gamma, double dt)
{
    if (!(gamma > 0.0))
        throw std::invalid_argument("equatorial_projector: gamma must be positive");
    Eigen::Vector2cd s(1.0, std::polar(1.0, phi_s));
    Eigen::Vector2cd i(1.0, std::polar(1.0, phi_i));
    Ket4 p;
    p << s(0) * i(0), s(0) * i(1), s(1) * i(0), s(1) * i(1);
    p *= 0.5;
    return {p * p.adjoint(), std::exp(-gamma * std::abs(dt))};
}

double expectation(const TwoQubitState& state, const Matrix4& op)
{
    return (state.matrix() * op).trace().real();
}

double expectation(const TwoQubitState& state, const Observable& obs)
{
    return expectation(state, obs.matrix);
}

double detection_probability(const TwoQubitState& state, const ProjectorWithEfficiency& proj)
{
    return proj.efficiency * expectation(state, proj.matrix);
}

double min_eigenvalue(const Matrix4& hermitian)
{
    Eigen::SelfAdjointEigenSolver<Matrix4> es(hermitian, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double fidelity(const TwoQubitState& rho, const TwoQubitState& target)
{
    // A pure argument reduces the Uhlmann form to <psi|rho|psi>; the square roots of its
    // zero eigenvalues would otherwise add ~1e-8 of rounding noise.
    for (const auto* pure : {&target, &rho}) {
        if (std::abs(purity(*pure) - 1.0) < 1e-12) {
            Eigen::SelfAdjointEigenSolver<Matrix4> es(pure->matrix());
            const Ket4 psi = es.eigenvectors().col(3);
            const Matrix4& other = pure == &target ? rho.matrix() : target.matrix();
            return std::clamp((psi.adjoint() * other * psi)(0, 0).real(), 0.0, 1.0);
        }
    }
    const Matrix4 sr = hermitian_sqrt(rho.matrix());
    Matrix4 inner = sr * target.matrix() * sr;
    inner = 0.5 * (inner + inner.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix4> es(inner, Eigen::EigenvaluesOnly);
    double tr = 0.0;
    for (int k = 0; k < 4; ++k)
        tr += std::sqrt(std::max(0.0, es.eigenvalues()(k)));
    return std::clamp(tr * tr, 0.0, 1.0);
}

double purity(const TwoQubitState& rho)
{
    return (rho.matrix() * rho.matrix()).trace().real();
}

JointProbabilities joint_probabilities(const TwoQubitState& state, const Matrix2& signal_obs,
                                       const Matrix2& idler_obs)
{
    const Matrix2 id = Matrix2::Identity();
    const std::array<Matrix2, 2> ps{0.5 * (id + signal_obs), 0.5 * (id - signal_obs)};
    const std::array<Matrix2, 2> pi{0.5 * (id + idler_obs), 0.5 * (id - idler_obs)};
    JointProbabilities out{};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            out[a][b] = std::max(0.0, expectation(state, kron(ps[a], pi[b])));
    return out;
}

double chsh_value(const TwoQubitState& state)
{
    const double r = 1.0 / std::sqrt(2.0);
    const Matrix2 x = pauli(Pauli::X), y = pauli(Pauli::Y);
    const Matrix2 a0 = x, a1 = y, b0 = r * (x - y), b1 = r * (x + y);
    return std::abs(expectation(state, kron(a0, b0)) + expectation(state, kron(a0, b1)) +
                    expectation(state, kron(a1, b0)) - expectation(state, kron(a1, b1)));
}

} // namespace fbent
