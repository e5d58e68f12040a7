// Stationary equilibrium clearing rates across adherence levels, for the
// baseline calibration and for steeper cover-utility exponents.

#include <cstdio>

#include <canopy/equilibrium.hpp>

int main() {
    canopy::ModelParams p;
    p.mu = 0.0482;
    p.sigma = 0.258;
    p.rho = 0.0487;
    p.gamma = 2.272;
    p.g2_form = canopy::G2Form::PowA;
    canopy::BeliefPrior prior{0.553, 2.251};

    std::printf("%6s", "a");
    for (double k : {1.0, 2.0, 3.0}) std::printf("   q(a), k=%.0f", k);
    std::printf("\n");

    canopy::EquilibriumSolution sols[3];
    for (int i = 0; i < 3; ++i) {
        p.g2_k2 = i + 1.0;
        sols[i] = canopy::q_mfe_stationary(p, prior);
    }
    for (int row = 0; row <= 20; ++row) {
        double a = row / 20.0;
        std::printf("%6.2f", a);
        for (const auto& s : sols) std::printf("   %10.6f", s.rate_at(a));
        std::printf("\n");
    }
    std::printf("\nthreshold mu - sigma^2/2 = %.6f\n", p.threshold());
    for (int i = 0; i < 3; ++i) {
        auto v = canopy::classify_sustainability(sols[i]);
        std::printf("k=%d: belief-averaged rate %.6f", i + 1, sols[i].q_tilde_star);
        if (v.a_star)
            std::printf(", sustainable above a* = %.4f\n", *v.a_star);
        else
            std::printf(", no interior switch\n");
    }
    return 0;
}
