#pragma once

// Fitting of measured or synthetic scan data: propagation loss from
// intensity-vs-distance scans, degree of polarization from analyzer scans,
// and count-rate-to-efficiency conversion.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "wgbs/error.hpp"
#include "wgbs/numerics.hpp"

namespace wgbs {

// --- intensity-vs-distance scans ---------------------------------------------

struct ScanSample {
    double distance_um = 0.0;    // from the detection facet, along the optical path
    double intensity_cps = 0.0;  // peak intensity, counts per second
    std::string arm;             // which waveguide arm was excited (a, c, d, coupler)
};

struct ScanDataset {
    std::vector<ScanSample> samples;

    void validate() const {
        for (const auto& s : samples) {
            if (!(s.distance_um >= 0.0))
                throw domain_error("scan dataset: distances must be non-negative");
            if (!(s.intensity_cps > 0.0))
                throw domain_error("scan dataset: intensities must be positive");
        }
    }
};

// Read a scan dataset from CSV with columns distance_um, intensity_cps, arm.
// Lines starting with '#' are comments.
inline ScanDataset scan_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("cannot open scan file: " + path);
    ScanDataset data;
    std::string line;
    bool header_seen = false;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 3)
            throw domain_error("scan file " + path + ": line " + std::to_string(lineno) +
                               ": expected 3 columns");
        if (!header_seen) {
            if (fields[0] != "distance_um" || fields[1] != "intensity_cps" || fields[2] != "arm")
                throw domain_error("scan file " + path +
                                   ": header must be distance_um,intensity_cps,arm");
            header_seen = true;
            continue;
        }
        ScanSample s;
        try {
            size_t used = 0;
            s.distance_um = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing");
            s.intensity_cps = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw domain_error("scan file " + path + ": line " + std::to_string(lineno) +
                               ": non-numeric value");
        }
        s.arm = fields[2];
        data.samples.push_back(std::move(s));
    }
    if (!header_seen) throw domain_error("scan file " + path + ": missing header");
    data.validate();
    return data;
}

struct LossFit {
    double alpha_db_per_um = 0.0;
    double alpha_stderr_db_per_um = 0.0;
    double intercept_log10 = 0.0;       // log10 intensity extrapolated to distance 0
    double residual_variance = 0.0;     // in log10 units, dof = n - 2
    std::size_t n_points = 0;
};

// Ordinary least squares of log10(intensity) against distance over the
// samples whose arm matches arm_filter (empty filter keeps everything);
// alpha = -10 * slope, in dB per micrometre.
inline LossFit fit_loss(const ScanDataset& data, const std::string& arm_filter = "a") {
    data.validate();
    std::vector<double> x, y;
    for (const auto& s : data.samples) {
        if (!arm_filter.empty() && s.arm != arm_filter) continue;
        x.push_back(s.distance_um);
        y.push_back(std::log10(s.intensity_cps));
    }
    if (x.size() < 3)
        throw domain_error("fit_loss: needs at least 3 samples in arm '" + arm_filter + "'");
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mn == *mx) throw numeric_error("fit_loss: all distances identical; fit is singular");

    const LinearFit lf = linear_fit(x, y);
    LossFit out;
    out.alpha_db_per_um = -10.0 * lf.slope;
    out.alpha_stderr_db_per_um = 10.0 * lf.slope_stderr;
    out.intercept_log10 = lf.intercept;
    out.residual_variance = lf.residual_variance;
    out.n_points = lf.n;
    return out;
}

// Power transmission over a propagation distance at a given loss coefficient.
inline double transmission(double alpha_db_per_um, double distance_um) {
    if (!(alpha_db_per_um >= 0.0)) throw domain_error("transmission: alpha must be >= 0");
    if (!(distance_um >= 0.0)) throw domain_error("transmission: distance must be >= 0");
    return std::pow(10.0, -alpha_db_per_um * distance_um / 10.0);
}

// --- analyzer (polarization) scans -------------------------------------------

struct PolarizationSample {
    double angle_deg = 0.0;
    double intensity_cps = 0.0;
};

struct PolarizationScan {
    std::vector<PolarizationSample> samples;

    void validate() const {
        if (samples.size() < 8)
            throw domain_error("polarization scan: needs at least 8 samples");
        double lo = samples.front().angle_deg, hi = lo;
        for (const auto& s : samples) {
            lo = std::min(lo, s.angle_deg);
            hi = std::max(hi, s.angle_deg);
            if (!(s.intensity_cps >= 0.0))
                throw domain_error("polarization scan: intensities must be non-negative");
        }
        if (!(hi - lo >= 180.0))
            throw domain_error("polarization scan: angles must span at least 180 degrees");
    }
};

inline PolarizationScan polarization_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw domain_error("cannot open polarization file: " + path);
    PolarizationScan scan;
    std::string line;
    bool header_seen = false;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 2)
            throw domain_error("polarization file " + path + ": line " +
                               std::to_string(lineno) + ": expected 2 columns");
        if (!header_seen) {
            if (fields[0] != "angle_deg" || fields[1] != "intensity_cps")
                throw domain_error("polarization file " + path +
                                   ": header must be angle_deg,intensity_cps");
            header_seen = true;
            continue;
        }
        PolarizationSample s;
        try {
            size_t used = 0;
            s.angle_deg = std::stod(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing");
            s.intensity_cps = std::stod(fields[1], &used);
            if (used != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw domain_error("polarization file " + path + ": line " +
                               std::to_string(lineno) + ": non-numeric value");
        }
        scan.samples.push_back(s);
    }
    if (!header_seen) throw domain_error("polarization file " + path + ": missing header");
    scan.validate();
    return scan;
}

struct DopFit {
    double dop = 0.0;              // degree of polarization, in [0, 1]
    double orientation_deg = 0.0;  // polarization axis, reported modulo 180
    double amplitude = 0.0;        // A in I = A cos^2(theta - theta0) + B
    double background = 0.0;       // B, clipped at zero
};

// Malus-law fit I(theta) = A cos^2(theta - theta0) + B via the exact
// linearization I = a + b cos(2 theta) + c sin(2 theta) solved by linear
// least squares; then A = 2 sqrt(b^2 + c^2), B = a - sqrt(b^2 + c^2)
// (clipped at 0) and DOP = A / (A + 2B).
inline DopFit fit_dop(const PolarizationScan& scan) {
    scan.validate();
    // Normal equations for the 3-parameter linear model.
    std::array<std::array<double, 3>, 3> m{};
    std::array<double, 3> rhs{};
    for (const auto& s : scan.samples) {
        const double t = 2.0 * s.angle_deg * std::numbers::pi / 180.0;
        const double row[3] = {1.0, std::cos(t), std::sin(t)};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
            rhs[i] += row[i] * s.intensity_cps;
        }
    }
    std::array<double, 3> abc{};
    try {
        abc = solve3x3(m, rhs);
    } catch (const numeric_error&) {
        throw numeric_error("fit_dop: degenerate analyzer angles; fit is singular");
    }
    const double a = abc[0], b = abc[1], c = abc[2];
    const double r = std::hypot(b, c);

    DopFit out;
    out.amplitude = 2.0 * r;
    out.background = std::max(a - r, 0.0);
    const double denom = out.amplitude + 2.0 * out.background;
    out.dop = (denom > 0.0) ? out.amplitude / denom : 0.0;
    out.orientation_deg = 0.5 * std::atan2(c, b) * 180.0 / std::numbers::pi;
    out.orientation_deg = std::fmod(out.orientation_deg + 180.0, 180.0);
    return out;
}

// --- count-rate conversion ----------------------------------------------------

// Probability per excitation pulse of registering a (dark-subtracted) count.
inline double measured_overall_efficiency(double count_rate_cps, double dark_rate_cps,
                                          double rep_rate_hz) {
    if (!(dark_rate_cps >= 0.0))
        throw domain_error("measured_overall_efficiency: dark rate must be >= 0");
    if (count_rate_cps < dark_rate_cps)
        throw domain_error("measured_overall_efficiency: count rate below dark rate");
    if (!(rep_rate_hz > 0.0))
        throw domain_error("measured_overall_efficiency: repetition rate must be positive");
    return (count_rate_cps - dark_rate_cps) / rep_rate_hz;
}

}  // namespace wgbs
