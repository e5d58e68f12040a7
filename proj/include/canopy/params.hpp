#pragma once

// Model primitives: drift/volatility/discounting, CRRA curvature, and the two
// channels through which a household's traditional-belief adherence a in [0,1]
// enters preferences:
//   g1(a) scales utility from own clearing income,
//   g2(a) scales utility from aggregate forest cover.

#include <cmath>
#include <string>

#include "canopy/errors.hpp"

namespace canopy {

enum class G1Form { Unit, OneMinusPowA };
enum class G2Form { Zero, PowA };

struct ModelParams {
    double mu = 0.0;     // GBM drift of untouched cover
    double sigma = 0.0;  // GBM volatility
    double rho = 0.0;    // discount rate
    double gamma = 0.0;  // CRRA curvature, != 1

    G1Form g1_form = G1Form::Unit;
    double g1_c = 1.0;   // OneMinusPowA: g1(a) = 1 - c a^k1, c in [0,1]
    double g1_k1 = 1.0;
    G2Form g2_form = G2Form::PowA;
    double g2_k2 = 1.0;  // PowA: g2(a) = a^k2

    double g1(double a) const {
        check_adherence(a);
        if (g1_form == G1Form::Unit) return 1.0;
        return 1.0 - g1_c * std::pow(a, g1_k1);
    }

    double g2(double a) const {
        check_adherence(a);
        if (g2_form == G2Form::Zero) return 0.0;
        return std::pow(a, g2_k2);
    }

    // Deforestation is unsustainable when the clearing rate exceeds mu - sigma^2/2.
    double threshold() const { return mu - 0.5 * sigma * sigma; }

    void validate() const {
        if (!(sigma >= 0.0)) throw validation_error("sigma", "must be >= 0");
        if (!(rho > 0.0)) throw validation_error("rho", "must be > 0");
        if (!(gamma > 0.0) || gamma == 1.0)
            throw validation_error("gamma", "must be > 0 and != 1");
        if (g1_form == G1Form::OneMinusPowA) {
            if (!(g1_c >= 0.0 && g1_c <= 1.0))
                throw validation_error("g1_form.c", "must lie in [0,1]");
            if (!(g1_k1 > 0.0)) throw validation_error("g1_form.k1", "must be > 0");
        }
        if (g2_form == G2Form::PowA && !(g2_k2 > 0.0))
            throw validation_error("g2_form.k2", "must be > 0");
        // transversality: discounting must dominate utility growth
        double tv = mu * (1.0 - gamma) - 0.5 * sigma * sigma * gamma * (1.0 - gamma);
        if (!(rho > tv))
            throw validation_error("rho", "transversality violated: rho must exceed "
                                          "mu(1-gamma) - sigma^2/2 gamma(1-gamma)");
        // the value-function exponent 1 - g1(a)(1-gamma) must stay positive
        for (int i = 0; i <= 20; ++i) {
            double a = i / 20.0;
            if (!(1.0 - g1(a) * (1.0 - gamma) > 0.0))
                throw validation_error("gamma", "1 - g1(a)(1-gamma) must be positive on [0,1]");
        }
    }

    static void check_adherence(double a) {
        if (!(a >= 0.0 && a <= 1.0))
            throw validation_error("a", "adherence must lie in [0,1]");
    }
};

// Consumption-policy elasticities at adherence a.
struct Elasticities {
    double eps_q;    // policy scale: (1 - g1(a)(1-gamma))^{-1}
    double nu_q;     // own-cover exponent in the clearing policy: g1(a)(1-gamma)
    double nu_xbar;  // aggregate-cover exponent: g2(a)(1-gamma)
};

inline Elasticities elasticities(double a, const ModelParams& p) {
    Elasticities e;
    e.nu_q = p.g1(a) * (1.0 - p.gamma);
    e.nu_xbar = p.g2(a) * (1.0 - p.gamma);
    e.eps_q = 1.0 / (1.0 - e.nu_q);
    return e;
}

}  // namespace canopy
