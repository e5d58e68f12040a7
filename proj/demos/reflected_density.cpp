// Transition density of cover reflected at the land cap, converging to the
// stationary exponential profile as the horizon grows.

#include <cmath>
#include <cstdio>

#include <canopy/dynamics.hpp>

int main() {
    canopy::ModelParams p;
    p.mu = 0.0482;
    p.sigma = 0.258;
    p.rho = 0.0487;
    p.gamma = 2.272;
    double rate = -0.06;  // managed regime: net replanting, drift toward the cap
    double cap = 100.0;

    canopy::DensitySpec spec;
    spec.mu_star = p.mu - rate;
    spec.sigma = p.sigma;
    spec.x0 = 40.0;
    spec.cap = cap;

    std::printf("%8s %12s %12s %12s %14s\n", "x", "t=2", "t=10", "t=100", "stationary");
    for (int i = 1; i <= 20; ++i) {
        double x = cap * i / 20.0;
        double st = canopy::stationary_density(std::log(x), p, rate, cap) / x;  // level density
        std::printf("%8.1f %12.6f %12.6f %12.6f %14.6f\n", x,
                    canopy::reflected_tpd(x, 2.0, spec), canopy::reflected_tpd(x, 10.0, spec),
                    canopy::reflected_tpd(x, 100.0, spec), st);
    }

    // mass check by trapezoid on a fine grid
    for (double t : {2.0, 10.0, 100.0}) {
        const int n = 20000;
        double mass = 0.0, prev = 0.0;
        for (int i = 0; i <= n; ++i) {
            double x = cap * i / static_cast<double>(n);
            double d = x == 0.0 ? 0.0 : canopy::reflected_tpd(x, t, spec);
            if (i > 0) mass += 0.5 * (prev + d) * (cap / n);
            prev = d;
        }
        std::printf("t=%5.0f: total mass %.8f\n", t, mass);
    }
    return 0;
}
