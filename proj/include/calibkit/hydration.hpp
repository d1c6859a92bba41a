#ifndef CALIBKIT_HYDRATION_HPP
#define CALIBKIT_HYDRATION_HPP

#include <cmath>
#include <Eigen/Dense>

#include "calibkit/errors.hpp"

namespace calibkit {

using Vector4 = Eigen::Vector4d;

/// Affinity model parameters in physical units.
///   b1        rate coefficient [1/h],            0.1 .. 1
///   b2        chemical coefficient [-],          1e-6 .. 1e-3
///   eta_bar   microdiffusion exponent [-],       2 .. 12
///   alpha_inf ultimate hydration degree [-],     0.7 .. 1.0
struct PhysicalParams {
    double b1 = 0.55;
    double b2 = 3.1622776601683795e-5;
    double eta_bar = 7.0;
    double alpha_inf = 0.85;
};

/// Parameters mapped into the unit cube (log-affine for b2). Values outside
/// [0,1] are representable; they arise from inverse surrogates that
/// extrapolate, and `in_cube()` reports them.
struct StandardizedParams {
    Vector4 p = Vector4::Constant(0.5);

    StandardizedParams() = default;
    explicit StandardizedParams(const Vector4& v) : p(v) {}
    StandardizedParams(double p1, double p2, double p3, double p4) : p(p1, p2, p3, p4) {}

    double operator[](int i) const { return p[i]; }
    bool in_cube() const { return (p.array() >= 0.0).all() && (p.array() <= 1.0).all(); }
};

StandardizedParams standardize(const PhysicalParams& phys);

/// Inverse of `standardize`; throws DomainError for components outside [0,1].
PhysicalParams destandardize(const StandardizedParams& p);

/// Same mapping without the cube check, for re-simulating extrapolated
/// estimates. Still throws when the result is physically meaningless
/// (b1 <= 0 or alpha_inf <= 0).
PhysicalParams destandardize_extrapolated(const StandardizedParams& p);

/// Normalized affinity at 25 C. No domain check; valid for 0 <= alpha <= alpha_inf.
template <class Scalar>
Scalar affinity25_unchecked(Scalar alpha, const PhysicalParams& k) {
    using std::exp;
    return Scalar(k.b1) * (Scalar(k.b2 / k.alpha_inf) + alpha) * (Scalar(k.alpha_inf) - alpha) *
           exp(-Scalar(k.eta_bar) * alpha / Scalar(k.alpha_inf));
}

/// Normalized affinity at 25 C [1/h]; throws DomainError outside [0, alpha_inf].
double affinity25(double alpha, const PhysicalParams& phys);

inline constexpr double kGasConstant = 8.314;  // J/(mol K)
inline constexpr double kReferenceTemperatureK = 298.15;

struct ThermalConditions {
    double temperature_c = 25.0;
    double activation_energy = 0.0;  // J/mol
};

/// Arrhenius scale applied to the 25 C affinity.
double arrhenius_factor(const ThermalConditions& cond);

/// Activation energy giving `factor` at `temperature_c`.
double activation_energy_for_factor(double factor, double temperature_c);

/// Strictly increasing time points [h], log-uniform.
class TimeGrid {
public:
    static constexpr int kDefaultCount = 1161;
    static constexpr double kDefaultStart = 1e-2;
    static constexpr double kDefaultEnd = 1e3;

    TimeGrid() : TimeGrid(kDefaultStart, kDefaultEnd, kDefaultCount) {}
    TimeGrid(double t_first, double t_last, int count);
    explicit TimeGrid(Eigen::VectorXd times);

    const Eigen::VectorXd& times() const { return times_; }
    int size() const { return static_cast<int>(times_.size()); }
    double operator[](int k) const { return times_[k]; }
    /// Time of the 1-based response component alpha_k.
    double at_component(int k) const { return times_[k - 1]; }

private:
    Eigen::VectorXd times_;
};

struct HydrationCurve {
    Eigen::VectorXd alpha;  // one value per grid time
};

struct IntegratorOptions {
    double tolerance = 1e-8;      // step-doubling estimate bound on alpha, absolute
    int max_substeps = 1 << 16;   // per grid interval
    int fixed_substeps = 0;       // > 0 disables adaptivity
};

/// Integrates d(alpha)/dt = f_T * A25(alpha) from alpha(0) = 0 with classical
/// RK4 between consecutive grid times. Adaptive mode doubles the substep
/// count of an interval until two successive refinements agree within the
/// tolerance. Throws NumericalError if max_substeps is exhausted.
HydrationCurve simulate(const PhysicalParams& phys, const TimeGrid& grid,
                        const ThermalConditions& cond = {}, const IntegratorOptions& opts = {});

HydrationCurve simulate(const StandardizedParams& p, const TimeGrid& grid,
                        const ThermalConditions& cond = {}, const IntegratorOptions& opts = {});

/// Simulates every row of `design` (N x 4 standardized points); returns N x N_time.
Eigen::MatrixXd simulate_bundle(const Eigen::MatrixXd& design, const TimeGrid& grid,
                                const ThermalConditions& cond = {}, int jobs = 1,
                                const IntegratorOptions& opts = {});

struct HeatConversion {
    Eigen::VectorXd alpha;
    bool out_of_range = false;  // some value outside [0, 1]
};

/// alpha = Q / Q_pot elementwise, without clamping.
HeatConversion heat_to_alpha(const Eigen::VectorXd& heat, double q_pot);

}  // namespace calibkit

#endif
