#include <gtest/gtest.h>

#include <cmath>

#include <canopy/instrument.hpp>
#include <canopy/json_io.hpp>
#include <canopy/rng.hpp>

using namespace canopy;

TEST(Linguistic, WorkedPairMatchesFrozenValues) {
    LanguageClassification yo = yoruba_classification();
    LanguageClassification ba = baatonum_classification();
    ASSERT_EQ(yo.nodes.size(), 7u);
    ASSERT_EQ(ba.nodes.size(), 6u);
    // first divergence after Volta-Congo: 3 shared nodes over mean length 6.5
    EXPECT_NEAR(linguistic_distance(yo, ba, 0.5), 0.320633779513, 1e-10);
    EXPECT_NEAR(linguistic_distance(yo, ba, 1.0), 0.538461538462, 1e-10);
    EXPECT_NEAR(linguistic_distance(yo, ba, 0.25), 0.175763249735, 1e-10);
    EXPECT_NEAR(linguistic_distance(ba, yo, 0.5), linguistic_distance(yo, ba, 0.5), 1e-15);
}

TEST(Linguistic, DistanceGrowsWithTheDecayExponent) {
    // d = 1 - s^lambda with shared ratio s in (0,1) is increasing in lambda
    LanguageClassification yo = yoruba_classification();
    LanguageClassification ba = baatonum_classification();
    double prev = -1.0;
    for (double lam : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        double d = linguistic_distance(yo, ba, lam);
        EXPECT_GT(d, prev);
        prev = d;
    }
    EXPECT_DOUBLE_EQ(linguistic_distance(yo, ba, 0.0), 0.0);
}

TEST(Linguistic, EdgeCasesAndValidation) {
    LanguageClassification yo = yoruba_classification();
    EXPECT_DOUBLE_EQ(linguistic_distance(yo, yo, 0.7), 0.0);  // identical chains

    LanguageClassification other{"unrelated", {"Afro-Asiatic", "Chadic"}};
    EXPECT_DOUBLE_EQ(linguistic_distance(yo, other, 1.0), 1.0);  // no shared prefix

    EXPECT_THROW(linguistic_distance(yo, yo, -0.1), validation_error);
    EXPECT_THROW(linguistic_distance(yo, yo, 1.1), validation_error);
    LanguageClassification empty{"x", {}};
    EXPECT_THROW(linguistic_distance(yo, empty, 0.5), validation_error);
}

TEST(Geo, HaversineMatchesReferenceDistances) {
    // Lagos to Cotonou
    EXPECT_NEAR(haversine_km(6.5244, 3.3792, 6.3703, 2.3912), 110.5024923985, 1e-6);
    EXPECT_NEAR(haversine_km(0.0, 0.0, 0.0, 180.0), 20015.1144420359, 1e-6);
    EXPECT_NEAR(haversine_km(0.0, 0.0, 1.0, 0.0), 111.1950802335, 1e-6);
    EXPECT_DOUBLE_EQ(haversine_km(6.5, 3.4, 6.5, 3.4), 0.0);
    EXPECT_NEAR(haversine_km(6.5244, 3.3792, 6.3703, 2.3912),
                haversine_km(6.3703, 2.3912, 6.5244, 3.3792), 1e-12);
    EXPECT_THROW(haversine_km(91.0, 0.0, 0.0, 0.0), validation_error);
    EXPECT_THROW(haversine_km(0.0, 181.0, 0.0, 0.0), validation_error);
}

TEST(Geo, FreeSpaceSignalFollowsPathLossLaw) {
    TransmitterSpec tx;
    tx.name = "osogbo";
    tx.lat = 0.0;
    tx.lon = 0.0;
    tx.freq_mhz = 100.0;
    tx.erp_dbm = 60.0;
    tx.year_active = 1959;
    // receiver 1 degree north: d = 111.195 km
    double d = haversine_km(0.0, 0.0, 1.0, 0.0);
    double want = 60.0 + 2.15 - (32.45 + 20.0 * std::log10(100.0) + 20.0 * std::log10(d));
    EXPECT_NEAR(free_space_signal_dbm(tx, 1.0, 0.0), want, 1e-12);
    // doubling the distance costs 6.02 dB
    double s1 = free_space_signal_dbm(tx, 1.0, 0.0);
    double s2 = free_space_signal_dbm(tx, 2.0, 0.0);
    EXPECT_NEAR(s1 - s2, 20.0 * std::log10(2.0), 1e-3);  // small sphere-vs-plane slack
    // receiver on top of the mast is rejected
    EXPECT_THROW(free_space_signal_dbm(tx, 0.0, 0.0), validation_error);

    TransmitterSpec bad = tx;
    bad.freq_mhz = 0.0;
    EXPECT_THROW(free_space_signal_dbm(bad, 1.0, 0.0), validation_error);
}

TEST(Exposure, NormalizationAnchorsMaxAtZeroAndFloorAtOne) {
    std::vector<double> s = {-80.0, -60.0, -100.0};
    std::vector<double> rp = normalize_exposure(s, -120.0);
    ASSERT_EQ(rp.size(), 3u);
    EXPECT_NEAR(rp[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(rp[1], 0.0, 1e-15);
    EXPECT_NEAR(rp[2], 2.0 / 3.0, 1e-15);

    // constant signals carry no propagation variation
    std::vector<double> flat = {-70.0, -70.0};
    std::vector<double> rpf = normalize_exposure(flat, -120.0);
    EXPECT_DOUBLE_EQ(rpf[0], 1.0);
    EXPECT_DOUBLE_EQ(rpf[1], 1.0);

    // signals below the floor clamp at full exposure
    std::vector<double> deep = {-50.0, -140.0};
    std::vector<double> rpd = normalize_exposure(deep, -120.0);
    EXPECT_DOUBLE_EQ(rpd[0], 0.0);
    EXPECT_DOUBLE_EQ(rpd[1], 1.0);

    EXPECT_THROW(normalize_exposure({}, -120.0), validation_error);
}

TEST(Exposure, ZIndexVariantsDropTheRightFactors) {
    std::vector<ExposureRow> rows(2);
    rows[0] = {"u1", 2005, 120.0, 0.4, 2.0, 0.5, 0.0};
    rows[1] = {"u2", 2005, 80.0, 0.2, 4.0, 0.25, 0.0};
    auto full = rows;
    z_index(full, ZVariant::Full);
    EXPECT_NEAR(full[0].z, 120.0 * 0.4 / 2.0 * 0.5, 1e-12);
    EXPECT_NEAR(full[1].z, 80.0 * 0.2 / 4.0 * 0.25, 1e-12);

    auto no_hd = rows;
    z_index(no_hd, ZVariant::DropHd);
    EXPECT_NEAR(no_hd[0].z, 0.4 / 2.0 * 0.5, 1e-12);

    auto no_rp = rows;
    z_index(no_rp, ZVariant::DropRp);
    EXPECT_NEAR(no_rp[0].z, 120.0 * 0.4 / 2.0, 1e-12);

    auto bad = rows;
    bad[0].pent_density = 0.0;
    EXPECT_THROW(z_index(bad, ZVariant::Full), validation_error);
}

namespace {

struct IvData {
    std::vector<double> y, x, z;
    std::vector<int> g;
};

// endogenous DGP: u hits both x and y, z shifts only x
IvData make_iv_data(int n, double beta, double pi, std::uint64_t seed) {
    Rng rng(seed);
    IvData d;
    d.y.resize(n);
    d.x.resize(n);
    d.z.resize(n);
    d.g.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        double u = rng.normal();
        double e = 0.5 * rng.normal();
        double x = pi * z + u + e;
        d.z[i] = z;
        d.x[i] = x;
        d.y[i] = beta * x + u;
        d.g[i] = i % 5;
    }
    return d;
}

}  // namespace

TEST(Iv, TwoStageLeastSquaresUndoesEndogeneityBias) {
    IvData d = make_iv_data(4000, 0.7, 1.0, derive_seed(42, "iv"));
    IvResult r = iv_2sls(d.y, d.x, d.z);
    EXPECT_EQ(r.n, 4000);
    EXPECT_NEAR(r.beta_iv, 0.7, 3.0 * r.se_iv);
    EXPECT_GT(std::abs(r.beta_ols - 0.7) / r.se_ols, 5.0);
    EXPECT_GT(r.first_stage_f, 10.0);
    EXPECT_NEAR(r.first_stage_coef, 1.0, 4.0 * r.first_stage_se);
    EXPECT_GT(r.se_iv, 0.0);

    IvResult again = iv_2sls(d.y, d.x, d.z);
    EXPECT_EQ(again.beta_iv, r.beta_iv);
    EXPECT_EQ(again.se_iv, r.se_iv);
}

TEST(Iv, GroupDemeaningAbsorbsFixedEffects) {
    IvData d = make_iv_data(3000, 0.7, 1.0, derive_seed(42, "iv-fe"));
    // inject large group effects into y and x; demeaning must recover beta
    for (int i = 0; i < 3000; ++i) {
        d.y[i] += 10.0 * d.g[i];
        d.x[i] += 3.0 * d.g[i];
    }
    IvResult with_fe = iv_2sls(d.y, d.x, d.z, d.g);
    EXPECT_NEAR(with_fe.beta_iv, 0.7, 3.0 * with_fe.se_iv);
    IvResult without = iv_2sls(d.y, d.x, d.z);
    EXPECT_GT(std::abs(without.beta_iv - 0.7), std::abs(with_fe.beta_iv - 0.7));
}

TEST(Iv, WeakInstrumentRaisesTypedError) {
    IvData d = make_iv_data(2000, 0.7, 0.01, derive_seed(42, "iv-weak"));
    try {
        iv_2sls(d.y, d.x, d.z);
        FAIL() << "expected weak_instrument_error";
    } catch (const weak_instrument_error& e) {
        EXPECT_LT(e.first_stage_f(), 10.0);
        EXPECT_NE(std::string(e.what()).find("weak"), std::string::npos);
    }
}

TEST(Iv, InputValidation) {
    std::vector<double> y(20, 1.0), x(20, 1.0), z(19, 1.0);
    EXPECT_THROW(iv_2sls(y, x, z), validation_error);
    std::vector<double> y5(5, 1.0), x5(5, 1.0), z5(5, 1.0);
    EXPECT_THROW(iv_2sls(y5, x5, z5), validation_error);
    IvData d = make_iv_data(100, 0.5, 1.0, 1);
    std::vector<int> short_g(99, 0);
    EXPECT_THROW(iv_2sls(d.y, d.x, d.z, short_g), validation_error);
}

TEST(Serialization, IvResultJsonHasAllFields) {
    IvData d = make_iv_data(500, 0.7, 1.0, derive_seed(42, "iv-json"));
    IvResult r = iv_2sls(d.y, d.x, d.z);
    json j = iv_to_json(r);
    EXPECT_DOUBLE_EQ(j["beta_iv"].get<double>(), r.beta_iv);
    EXPECT_DOUBLE_EQ(j["se_iv"].get<double>(), r.se_iv);
    EXPECT_DOUBLE_EQ(j["beta_ols"].get<double>(), r.beta_ols);
    EXPECT_DOUBLE_EQ(j["first_stage_f"].get<double>(), r.first_stage_f);
    EXPECT_EQ(j["n"].get<int>(), r.n);
}
