#include "calibkit/hydration.hpp"

#include <algorithm>
#include <sstream>
#include <string>

#include "calibkit/parallel.hpp"

namespace calibkit {

namespace {

constexpr double kB1Min = 0.1, kB1Max = 1.0;
constexpr double kLogB2Min = -6.0, kLogB2Max = -3.0;
constexpr double kEtaMin = 2.0, kEtaMax = 12.0;
constexpr double kAlphaInfMin = 0.7, kAlphaInfMax = 1.0;

// Bounds are inclusive; the slack absorbs round-off from log10/pow round trips.
constexpr double kSlack = 1e-12;

void check_range(const char* name, double value, double lo, double hi) {
    const double span = hi - lo;
    if (!(value >= lo - kSlack * span && value <= hi + kSlack * span)) {
        std::ostringstream os;
        os.precision(17);
        os << name << " = " << value << " outside [" << lo << ", " << hi << "]";
        throw DomainError(os.str());
    }
}

PhysicalParams map_to_physical(const Vector4& p) {
    PhysicalParams k;
    k.b1 = kB1Min + (kB1Max - kB1Min) * p[0];
    k.b2 = std::pow(10.0, kLogB2Min + (kLogB2Max - kLogB2Min) * p[1]);
    k.eta_bar = kEtaMin + (kEtaMax - kEtaMin) * p[2];
    k.alpha_inf = kAlphaInfMin + (kAlphaInfMax - kAlphaInfMin) * p[3];
    return k;
}

// One classical RK4 step of size h for y' = scale * A25(y).
inline double rk4_step(double y, double h, double scale, const PhysicalParams& k) {
    const double k1 = scale * affinity25_unchecked(y, k);
    const double k2 = scale * affinity25_unchecked(y + 0.5 * h * k1, k);
    const double k3 = scale * affinity25_unchecked(y + 0.5 * h * k2, k);
    const double k4 = scale * affinity25_unchecked(y + h * k3, k);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline double integrate_interval(double y, double dt, int n, double scale, const PhysicalParams& k) {
    const double h = dt / n;
    for (int i = 0; i < n; ++i) y = rk4_step(y, h, scale, k);
    return y;
}

}  // namespace

StandardizedParams standardize(const PhysicalParams& phys) {
    check_range("b1", phys.b1, kB1Min, kB1Max);
    if (!(phys.b2 > 0.0)) throw DomainError("b2 must be positive");
    check_range("b2", phys.b2, 1e-6, 1e-3);
    check_range("eta_bar", phys.eta_bar, kEtaMin, kEtaMax);
    check_range("alpha_inf", phys.alpha_inf, kAlphaInfMin, kAlphaInfMax);
    return StandardizedParams((phys.b1 - kB1Min) / (kB1Max - kB1Min),
                              (std::log10(phys.b2) - kLogB2Min) / (kLogB2Max - kLogB2Min),
                              (phys.eta_bar - kEtaMin) / (kEtaMax - kEtaMin),
                              (phys.alpha_inf - kAlphaInfMin) / (kAlphaInfMax - kAlphaInfMin));
}

PhysicalParams destandardize(const StandardizedParams& p) {
    static const char* names[] = {"p1", "p2", "p3", "p4"};
    for (int i = 0; i < 4; ++i) check_range(names[i], p[i], 0.0, 1.0);
    return map_to_physical(p.p);
}

PhysicalParams destandardize_extrapolated(const StandardizedParams& p) {
    if (!p.p.allFinite()) throw DomainError("standardized parameters not finite");
    PhysicalParams k = map_to_physical(p.p);
    if (!(k.b1 > 0.0)) throw DomainError("extrapolated b1 is not positive");
    if (!(k.alpha_inf > 0.0)) throw DomainError("extrapolated alpha_inf is not positive");
    return k;
}

double affinity25(double alpha, const PhysicalParams& phys) {
    if (alpha < 0.0 || alpha > phys.alpha_inf)
        throw DomainError("alpha = " + std::to_string(alpha) + " outside [0, alpha_inf]");
    return affinity25_unchecked(alpha, phys);
}

double arrhenius_factor(const ThermalConditions& cond) {
    if (!(cond.temperature_c > -273.15)) throw DomainError("temperature below absolute zero");
    if (!(cond.activation_energy >= 0.0)) throw DomainError("activation energy must be non-negative");
    const double t_kelvin = cond.temperature_c + 273.15;
    return std::exp(cond.activation_energy / kGasConstant *
                    (1.0 / kReferenceTemperatureK - 1.0 / t_kelvin));
}

double activation_energy_for_factor(double factor, double temperature_c) {
    if (!(factor > 0.0)) throw DomainError("factor must be positive");
    const double dinv = 1.0 / kReferenceTemperatureK - 1.0 / (temperature_c + 273.15);
    if (dinv == 0.0) throw DomainError("reference temperature admits no activation energy");
    return kGasConstant * std::log(factor) / dinv;
}

TimeGrid::TimeGrid(double t_first, double t_last, int count) {
    if (count < 2) throw DomainError("time grid needs at least 2 points");
    if (!(t_first > 0.0 && t_last > t_first)) throw DomainError("time grid needs 0 < t_first < t_last");
    const double l0 = std::log10(t_first), l1 = std::log10(t_last);
    times_.resize(count);
    for (int k = 0; k < count; ++k)
        times_[k] = std::pow(10.0, l0 + (l1 - l0) * k / (count - 1));
    times_[count - 1] = t_last;
}

TimeGrid::TimeGrid(Eigen::VectorXd times) : times_(std::move(times)) {
    if (times_.size() < 1) throw DomainError("empty time grid");
    if (!(times_[0] > 0.0)) throw DomainError("time grid must start after t = 0");
    for (Eigen::Index k = 1; k < times_.size(); ++k)
        if (!(times_[k] > times_[k - 1])) throw DomainError("time grid not strictly increasing");
}

HydrationCurve simulate(const PhysicalParams& phys, const TimeGrid& grid,
                        const ThermalConditions& cond, const IntegratorOptions& opts) {
    const double scale = arrhenius_factor(cond);
    HydrationCurve out;
    out.alpha.resize(grid.size());

    double y = 0.0, t = 0.0;
    int n_start = 1;
    for (int k = 0; k < grid.size(); ++k) {
        const double dt = grid[k] - t;
        if (opts.fixed_substeps > 0) {
            y = integrate_interval(y, dt, opts.fixed_substeps, scale, phys);
        } else {
            int n = n_start;
            double coarse = integrate_interval(y, dt, n, scale, phys);
            double fine = integrate_interval(y, dt, 2 * n, scale, phys);
            double err = std::abs(fine - coarse);
            while (!(err <= opts.tolerance)) {
                n *= 2;
                if (2 * n > opts.max_substeps) {
                    std::ostringstream os;
                    os << "integrator did not reach tolerance on interval ending at t = " << grid[k]
                       << " h (residual " << err << ")";
                    throw NumericalError(os.str(), err);
                }
                coarse = fine;
                fine = integrate_interval(y, dt, 2 * n, scale, phys);
                err = std::abs(fine - coarse);
            }
            y = fine;
            n_start = std::max(1, n / 2);
        }
        out.alpha[k] = y;
        t = grid[k];
    }
    return out;
}

HydrationCurve simulate(const StandardizedParams& p, const TimeGrid& grid,
                        const ThermalConditions& cond, const IntegratorOptions& opts) {
    return simulate(destandardize(p), grid, cond, opts);
}

Eigen::MatrixXd simulate_bundle(const Eigen::MatrixXd& design, const TimeGrid& grid,
                                const ThermalConditions& cond, int jobs,
                                const IntegratorOptions& opts) {
    if (design.cols() != 4) throw ShapeError("design must have 4 columns");
    Eigen::MatrixXd bundle(design.rows(), grid.size());
    parallel_for(static_cast<std::size_t>(design.rows()), jobs, [&](std::size_t i) {
        const StandardizedParams p(Vector4(design.row(static_cast<Eigen::Index>(i)).transpose()));
        bundle.row(static_cast<Eigen::Index>(i)) = simulate(p, grid, cond, opts).alpha.transpose();
    });
    return bundle;
}

HeatConversion heat_to_alpha(const Eigen::VectorXd& heat, double q_pot) {
    if (!(q_pot > 0.0)) throw DomainError("q_pot must be positive");
    HeatConversion out;
    out.alpha = heat / q_pot;
    out.out_of_range = ((out.alpha.array() < 0.0) || (out.alpha.array() > 1.0)).any();
    return out;
}

}  // namespace calibkit
