#pragma once

// Radio-exposure instrument: linguistic proximity to the broadcast language,
// distance to the origin of the movement, local adherent density, and
// free-space signal strength from known transmitters combine into one
// exposure index per unit-year, validated with a small 2SLS harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "canopy/errors.hpp"
#include "canopy/math.hpp"

namespace canopy {

// ---------------------------------------------------------------------------
// Linguistic distance
// ---------------------------------------------------------------------------

struct LanguageClassification {
    std::string language_name;
    std::vector<std::string> nodes;  // family root outward

    void validate() const {
        if (nodes.empty()) throw validation_error("nodes", "classification must be non-empty");
        for (size_t i = 1; i < nodes.size(); ++i)
            if (nodes[i] == nodes[i - 1])
                throw validation_error("nodes", "duplicate consecutive label: " + nodes[i]);
    }
};

// 1 - (shared / mean length)^lambda, shared = longest common prefix.
inline double linguistic_distance(const LanguageClassification& l1,
                                  const LanguageClassification& l2, double lambda) {
    l1.validate();
    l2.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw validation_error("lambda", "must lie in [0,1]");
    size_t shared = 0;
    size_t m = std::min(l1.nodes.size(), l2.nodes.size());
    while (shared < m && l1.nodes[shared] == l2.nodes[shared]) ++shared;
    double ratio = static_cast<double>(shared) /
                   (0.5 * static_cast<double>(l1.nodes.size() + l2.nodes.size()));
    return 1.0 - std::pow(ratio, lambda);
}

// Ethnologue chains used throughout the tests and the bundled pipeline.
inline LanguageClassification yoruba_classification() {
    return {"Yoruba", {"Niger-Congo", "Atlantic-Congo", "Volta-Congo", "Benue-Congo",
                       "Defoid", "Yoruboid", "Edekiri"}};
}

inline LanguageClassification baatonum_classification() {
    return {"Baatonum", {"Niger-Congo", "Atlantic-Congo", "Volta-Congo", "North",
                         "Gur", "Bariba"}};
}

// ---------------------------------------------------------------------------
// Geography and propagation
// ---------------------------------------------------------------------------

inline constexpr double earth_radius_km = 6371.0088;  // IUGG mean radius

inline void check_coordinates(double lat, double lon) {
    if (!(lat >= -90.0 && lat <= 90.0)) throw validation_error("lat", "must lie in [-90,90]");
    if (!(lon >= -180.0 && lon <= 180.0)) throw validation_error("lon", "must lie in [-180,180]");
}

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    check_coordinates(lat1, lon1);
    check_coordinates(lat2, lon2);
    auto rad = [](double d) { return d * pi / 180.0; };
    double dlat = rad(lat2 - lat1);
    double dlon = rad(lon2 - lon1);
    double s = std::sin(0.5 * dlat), t = std::sin(0.5 * dlon);
    double h = s * s + std::cos(rad(lat1)) * std::cos(rad(lat2)) * t * t;
    return 2.0 * earth_radius_km * std::asin(std::min(1.0, std::sqrt(h)));
}

struct TransmitterSpec {
    std::string name;
    double lat = 0.0, lon = 0.0;
    double freq_mhz = 0.0;
    double erp_dbm = 0.0;
    int year_active = 0;

    void validate() const {
        check_coordinates(lat, lon);
        if (!(freq_mhz > 0.0)) throw validation_error("freq_mhz", "must be > 0");
    }
};

// Free-space received power. ERP referenced to a half-wave dipole converts to
// EIRP with +2.15 dB; loss = 32.45 + 20 log10 f_MHz + 20 log10 d_km.
inline double free_space_signal_dbm(const TransmitterSpec& tx, double lat, double lon,
                                    double dipole_gain_db = 2.15) {
    tx.validate();
    check_coordinates(lat, lon);
    double d = haversine_km(tx.lat, tx.lon, lat, lon);
    if (!(d > 1e-4))
        throw validation_error("distance", "receiver within 0.1 m of transmitter");
    return tx.erp_dbm + dipole_gain_db -
           (32.45 + 20.0 * std::log10(tx.freq_mhz) + 20.0 * std::log10(d));
}

// Inverted min-max rescale of best signals: 0 at the sample maximum signal,
// 1 at the floor. A constant vector carries no exposure variation and maps
// to 1 everywhere.
inline std::vector<double> normalize_exposure(const std::vector<double>& signals_dbm,
                                              double floor_dbm = -90.0) {
    if (signals_dbm.empty()) throw validation_error("signals", "must be non-empty");
    std::vector<double> s = signals_dbm;
    for (double& v : s) v = std::max(v, floor_dbm);
    double smax = *std::max_element(s.begin(), s.end());
    double smin = *std::min_element(s.begin(), s.end());
    std::vector<double> rp(s.size());
    if (!(smax > smin)) {
        std::fill(rp.begin(), rp.end(), 1.0);
        return rp;
    }
    for (size_t i = 0; i < s.size(); ++i) rp[i] = (smax - s[i]) / (smax - floor_dbm);
    return rp;
}

// ---------------------------------------------------------------------------
// Exposure index
// ---------------------------------------------------------------------------

enum class ZVariant { Full, DropHd, DropRp };

struct ExposureRow {
    std::string unit_id;
    int year = 0;
    double hd_km = 0.0;        // distance to the movement's origin
    double ld = 0.0;           // linguistic distance to the broadcast language
    double pent_density = 0.0; // adherents per km^2
    double rp_c = 0.0;         // normalized propagation exposure
    double z = 0.0;
};

inline void z_index(std::vector<ExposureRow>& rows, ZVariant variant = ZVariant::Full) {
    for (auto& r : rows) {
        if (!(r.pent_density > 0.0))
            throw validation_error("pent_density", "must be > 0 (unit " + r.unit_id + ", year " +
                                                       std::to_string(r.year) + ")");
        if (!(r.hd_km >= 0.0)) throw validation_error("hd_km", "must be >= 0");
        if (!(r.ld >= 0.0 && r.ld <= 1.0)) throw validation_error("ld", "must lie in [0,1]");
        if (!(r.rp_c >= 0.0 && r.rp_c <= 1.0)) throw validation_error("rp_c", "must lie in [0,1]");
        switch (variant) {
            case ZVariant::Full: r.z = (r.hd_km * r.ld / r.pent_density) * r.rp_c; break;
            case ZVariant::DropHd: r.z = (r.ld / r.pent_density) * r.rp_c; break;
            case ZVariant::DropRp: r.z = r.hd_km * r.ld / r.pent_density; break;
        }
    }
}

// ---------------------------------------------------------------------------
// Just-identified 2SLS harness
// ---------------------------------------------------------------------------

struct IvResult {
    double beta_iv = 0.0;
    double se_iv = 0.0;
    double beta_ols = 0.0;
    double se_ols = 0.0;
    double first_stage_coef = 0.0;
    double first_stage_se = 0.0;
    double first_stage_f = 0.0;
    int n = 0;
};

namespace detail {

inline void demean_by_group(std::vector<double>& v, const std::vector<int>& g) {
    std::map<int, std::pair<double, int>> acc;
    for (size_t i = 0; i < v.size(); ++i) {
        acc[g[i]].first += v[i];
        acc[g[i]].second += 1;
    }
    for (size_t i = 0; i < v.size(); ++i) {
        auto& a = acc[g[i]];
        v[i] -= a.first / a.second;
    }
}

}  // namespace detail

inline IvResult iv_2sls(const std::vector<double>& y_in, const std::vector<double>& x_in,
                        const std::vector<double>& z_in,
                        const std::optional<std::vector<int>>& group_ids = std::nullopt) {
    const size_t n = y_in.size();
    if (x_in.size() != n) throw validation_error("x_endog", "length mismatch with y");
    if (z_in.size() != n) throw validation_error("z", "length mismatch with y");
    if (n <= 10) throw validation_error("y", "need more than 10 observations");
    std::vector<double> y = y_in, x = x_in, z = z_in;
    if (group_ids) {
        if (group_ids->size() != n) throw validation_error("group_ids", "length mismatch with y");
        detail::demean_by_group(y, *group_ids);
        detail::demean_by_group(x, *group_ids);
        detail::demean_by_group(z, *group_ids);
    }
    double my = mean(y), mx = mean(x), mz = mean(z);
    double szx = 0.0, szy = 0.0, szz = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        szx += (z[i] - mz) * (x[i] - mx);
        szy += (z[i] - mz) * (y[i] - my);
        szz += (z[i] - mz) * (z[i] - mz);
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(szz > 0.0)) throw validation_error("z", "instrument has zero variance");
    if (!(sxx > 0.0)) throw validation_error("x_endog", "regressor has zero variance");

    IvResult res;
    res.n = static_cast<int>(n);

    // first stage x on z, heteroskedasticity-robust
    res.first_stage_coef = szx / szz;
    {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double u = (x[i] - mx) - res.first_stage_coef * (z[i] - mz);
            s += (z[i] - mz) * (z[i] - mz) * u * u;
        }
        res.first_stage_se = std::sqrt(s) / szz;
        double t = res.first_stage_coef / res.first_stage_se;
        res.first_stage_f = t * t;
    }
    if (res.first_stage_f < 10.0)
        throw weak_instrument_error("weak instrument: robust first-stage F = " +
                                        std::to_string(res.first_stage_f) + " < 10",
                                    res.first_stage_f);

    res.beta_iv = szy / szx;
    {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double u = (y[i] - my) - res.beta_iv * (x[i] - mx);
            s += (z[i] - mz) * (z[i] - mz) * u * u;
        }
        res.se_iv = std::sqrt(s) / std::abs(szx);
    }
    res.beta_ols = sxy / sxx;
    {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double u = (y[i] - my) - res.beta_ols * (x[i] - mx);
            s += (x[i] - mx) * (x[i] - mx) * u * u;
        }
        res.se_ols = std::sqrt(s) / sxx;
    }
    return res;
}

}  // namespace canopy
