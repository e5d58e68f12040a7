// Exposure index building blocks: linguistic distance, free-space signal,
// and the 2SLS harness on a synthetic first stage.

#include <cstdio>
#include <vector>

#include <canopy/instrument.hpp>
#include <canopy/rng.hpp>

int main() {
    auto yoruba = canopy::yoruba_classification();
    auto baatonum = canopy::baatonum_classification();
    for (double lambda : {0.25, 0.5, 1.0})
        std::printf("linguistic distance Baatonum-Yoruba, lambda=%.2f: %.4f\n", lambda,
                    canopy::linguistic_distance(baatonum, yoruba, lambda));

    canopy::TransmitterSpec tx{"Lagos FM", 6.5244, 3.3792, 98.1, 70.0, 1993};
    std::printf("\nsignal at increasing distance from a %g dBm / %g MHz transmitter:\n",
                tx.erp_dbm, tx.freq_mhz);
    for (double dlon : {0.1, 0.5, 1.0, 2.0, 4.0}) {
        double s = canopy::free_space_signal_dbm(tx, tx.lat, tx.lon + dlon);
        std::printf("  +%.1f deg lon (%6.1f km): %8.2f dBm\n", dlon,
                    canopy::haversine_km(tx.lat, tx.lon, tx.lat, tx.lon + dlon), s);
    }

    // synthetic just-identified IV with an endogenous regressor
    canopy::Rng rng(20240817);
    const int n = 2000;
    const double beta = 0.7;
    std::vector<double> x(n), y(n), z(n);
    for (int i = 0; i < n; ++i) {
        z[i] = rng.normal();
        double confound = rng.normal();
        x[i] = 0.8 * z[i] + confound + 0.3 * rng.normal();
        y[i] = beta * x[i] + 1.5 * confound + rng.normal();
    }
    auto iv = canopy::iv_2sls(y, x, z);
    std::printf("\ntrue beta %.2f | IV %.4f (se %.4f) | OLS %.4f (se %.4f) | first-stage F %.0f\n",
                beta, iv.beta_iv, iv.se_iv, iv.beta_ols, iv.se_ols, iv.first_stage_f);
    return 0;
}
