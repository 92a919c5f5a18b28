#pragma once

// Hamiltonian models with p-growth envelopes, their Legendre transforms
// (closed form for power models, brute-force fallback for custom ones) and
// envelope certification against (1/C)|xi|^p - C <= H <= C|xi|^p + C.

#include <functional>
#include <limits>
#include <memory>

#include "grid.hpp"

namespace hjlab {

struct GrowthViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EnvelopeReport {
    bool pass = false;
    double certified_bar_c = 1.0;  // tightest constant holding on the samples
    double declared_bar_c = 1.0;
    int samples = 0;
};

class HamiltonianModel {
public:
    enum class Kind { Power, Custom };

    // H(t,x,xi) = |xi|^p / (p a(t,x)^{p-1}) + offset, with a > 0
    static HamiltonianModel power(int d, double p, double bar_c,
                                  std::function<double(double, const Vec&)> coeff,
                                  double offset = 0.0, bool coeff_time_dependent = true) {
        HamiltonianModel m;
        m.kind_ = Kind::Power;
        m.init_exponents(p, bar_c);
        m.d_ = d;
        m.coeff_ = std::move(coeff);
        m.offset_ = offset;
        m.coeff_time_dependent_ = coeff_time_dependent;
        return m;
    }

    static HamiltonianModel power_const(int d, double p, double bar_c, double a,
                                        double offset = 0.0) {
        if (!(a > 0)) throw std::invalid_argument("HamiltonianModel: coefficient must be > 0");
        return power(d, p, bar_c, [a](double, const Vec&) { return a; }, offset, false);
    }

    static HamiltonianModel custom(int d, double p, double bar_c,
                                   std::function<double(double, const Vec&, const Vec&)> h) {
        HamiltonianModel m;
        m.kind_ = Kind::Custom;
        m.init_exponents(p, bar_c);
        m.d_ = d;
        m.custom_ = std::move(h);
        return m;
    }

    Kind kind() const { return kind_; }
    int dim() const { return d_; }
    double p() const { return p_; }
    double q() const { return q_; }
    double bar_c() const { return bar_c_; }
    double offset() const { return offset_; }
    bool coeff_time_dependent() const { return coeff_time_dependent_; }
    bool envelope_certified() const { return envelope_certified_; }
    void mark_envelope_certified() { envelope_certified_ = true; }

    double coefficient(double t, const Vec& x) const {
        double a = coeff_(t, x);
        if (!(a > 0)) throw std::domain_error("HamiltonianModel: coefficient must stay > 0");
        return a;
    }

    double eval(double t, const Vec& x, const Vec& xi) const {
        for (int c = 0; c < d_; ++c)
            if (!std::isfinite(xi[c]))
                throw std::domain_error("eval_hamiltonian: non-finite gradient argument");
        if (kind_ == Kind::Power) {
            double a = coefficient(t, x);
            double n = vec_norm(xi, d_);
            return std::pow(n, p_) / (p_ * std::pow(a, p_ - 1.0)) + offset_;
        }
        return custom_(t, x, xi);
    }

    // L(t,x,v) = sup_xi <xi,v> - H(t,x,xi)
    double legendre(double t, const Vec& x, const Vec& v) const {
        if (kind_ == Kind::Power) {
            double a = coefficient(t, x);
            double n = vec_norm(v, d_);
            return a * std::pow(n, q_) / q_ - offset_;
        }
        return legendre_brute_force(t, x, v);
    }

    // argmax slope of the power Lagrangian: dL/dv magnitude, used by solvers
    // to size search radii
    double power_velocity_for_slope(double t, const Vec& x, double slope) const {
        double a = coefficient(t, x);
        return std::pow(std::max(0.0, slope) / a, p_ - 1.0);
    }

    double legendre_brute_force(double t, const Vec& x, const Vec& v, double tol = 1e-9,
                                double radius0 = 1.0, int max_doublings = 20) const {
        double radius = radius0;
        double prev = -std::numeric_limits<double>::infinity();
        for (int it = 0; it <= max_doublings; ++it) {
            double cur = sup_on_ball(t, x, v, radius);
            if (it > 0 && std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur)))
                return cur;
            prev = cur;
            radius *= 2;
        }
        throw GrowthViolation(
            "legendre_transform: sup did not stabilize (superlinear growth violated?)");
    }

private:
    void init_exponents(double p, double bar_c) {
        if (!(p > 1)) throw std::invalid_argument("HamiltonianModel: p > 1 required");
        if (!(bar_c >= 1)) throw std::invalid_argument("HamiltonianModel: bar_C >= 1 required");
        p_ = p;
        q_ = p / (p - 1.0);
        bar_c_ = bar_c;
    }

    double sup_on_ball(double t, const Vec& x, const Vec& v, double radius) const {
        const int n = 64;
        double best = -std::numeric_limits<double>::infinity();
        Vec best_xi{0, 0};
        auto value = [&](const Vec& xi) { return vec_dot(xi, v, d_) - custom_(t, x, xi); };
        if (d_ == 1) {
            for (int i = -n; i <= n; ++i) {
                Vec xi{radius * i / n, 0.0};
                double val = value(xi);
                if (val > best) { best = val; best_xi = xi; }
            }
        } else {
            for (int j = -n; j <= n; ++j)
                for (int i = -n; i <= n; ++i) {
                    Vec xi{radius * i / n, radius * j / n};
                    double val = value(xi);
                    if (val > best) { best = val; best_xi = xi; }
                }
        }
        // local refinement around the best grid point
        double h = radius / n;
        for (int round = 0; round < 24; ++round) {
            bool improved = false;
            for (int c = 0; c < d_; ++c)
                for (int s = -1; s <= 1; s += 2) {
                    Vec xi = best_xi;
                    xi[c] += s * h;
                    double val = value(xi);
                    if (val > best) { best = val; best_xi = xi; improved = true; }
                }
            if (!improved) h *= 0.5;
        }
        return best;
    }

    Kind kind_ = Kind::Power;
    int d_ = 1;
    double p_ = 2, q_ = 2, bar_c_ = 1, offset_ = 0;
    bool coeff_time_dependent_ = true;
    bool envelope_certified_ = false;
    std::function<double(double, const Vec&)> coeff_;
    std::function<double(double, const Vec&, const Vec&)> custom_;
};

struct EnvelopeSample {
    double t;
    Vec x;
    Vec xi;
};

// Certify (1/C)|xi|^p - C <= H <= C|xi|^p + C on the samples; returns the
// tightest C that works there and whether the declared constant passes.
inline EnvelopeReport check_growth_envelope(const HamiltonianModel& m,
                                            const std::vector<EnvelopeSample>& samples) {
    if (samples.empty())
        throw std::invalid_argument("check_growth_envelope: sample set must be nonempty");
    double needed = 1.0;
    for (const auto& s : samples) {
        double h = m.eval(s.t, s.x, s.xi);
        double xp = std::pow(vec_norm(s.xi, m.dim()), m.p());
        // upper bound H <= C(|xi|^p + 1)
        needed = std::max(needed, h / (xp + 1.0));
        // lower bound |xi|^p/C - C <= H  <=>  C^2 + H C - |xi|^p >= 0
        needed = std::max(needed, 0.5 * (-h + std::sqrt(h * h + 4.0 * xp)));
    }
    EnvelopeReport r;
    r.certified_bar_c = needed;
    r.declared_bar_c = m.bar_c();
    r.samples = static_cast<int>(samples.size());
    r.pass = needed <= m.bar_c() * (1 + 1e-12);
    return r;
}

// uniform sample set with |xi| filling [0, radius]
inline std::vector<EnvelopeSample> envelope_samples(int d, double radius, int count,
                                                    double t = 0.0) {
    std::vector<EnvelopeSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        double r = radius * i / std::max(1, count - 1);
        EnvelopeSample s{t, Vec{0, 0}, Vec{r, 0}};
        if (d == 2 && i % 2 == 1) s.xi = Vec{r / std::sqrt(2.0), r / std::sqrt(2.0)};
        out.push_back(s);
    }
    return out;
}

}  // namespace hjlab
