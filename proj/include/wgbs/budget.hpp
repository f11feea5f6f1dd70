#pragma once

// Multiplicative efficiency-chain evaluation with first-order uncertainty
// propagation, used to assemble the device's on-chip and overall efficiency
// from individually determined factors.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

#include "wgbs/config.hpp"
#include "wgbs/error.hpp"

namespace wgbs {

// Where a term's central value came from.
enum class TermSource { published, fdtd, scan_fit, manual };

inline const char* term_source_name(TermSource s) {
    switch (s) {
        case TermSource::published: return "published";
        case TermSource::fdtd: return "fdtd";
        case TermSource::scan_fit: return "scan-fit";
        case TermSource::manual: return "manual";
    }
    return "manual";
}

inline TermSource term_source_from_string(const std::string& s) {
    if (s == "published") return TermSource::published;
    if (s == "fdtd") return TermSource::fdtd;
    if (s == "scan-fit") return TermSource::scan_fit;
    if (s == "manual") return TermSource::manual;
    throw domain_error("unknown efficiency-term source '" + s +
                       "' (expected published, fdtd, scan-fit, or manual)");
}

struct EfficiencyTerm {
    std::string name;
    double value = 1.0;            // fraction in [0, 1]
    double rel_uncertainty = 0.0;  // relative, >= 0
    TermSource source = TermSource::manual;

    void validate() const {
        if (!(value >= 0.0 && value <= 1.0))
            throw domain_error("efficiency term '" + name + "': value must be in [0, 1]");
        if (!(rel_uncertainty >= 0.0))
            throw domain_error("efficiency term '" + name +
                               "': relative uncertainty must be >= 0");
    }
};

struct EfficiencyChain {
    std::vector<EfficiencyTerm> terms;  // as given
    double product = 1.0;
    double rel_uncertainty = 0.0;  // quadrature of the term relative uncertainties
    double abs_uncertainty = 0.0;  // product * rel_uncertainty
    double interval_low = 1.0;     // worst-case (interval) product bounds
    double interval_high = 1.0;
};

// Evaluate a multiplicative chain.  The product is always accumulated in a
// canonical term order (sorted by value, then name), so the result is
// bit-identical under any permutation of the input list.  Relative
// uncertainty combines in quadrature (independent factors, first order);
// interval bounds take every term at its extreme, clipped to [0, 1].
// An empty list yields the identity chain.
inline EfficiencyChain propagate_chain(const std::vector<EfficiencyTerm>& terms) {
    for (const auto& t : terms) t.validate();

    std::vector<const EfficiencyTerm*> order;
    order.reserve(terms.size());
    for (const auto& t : terms) order.push_back(&t);
    std::sort(order.begin(), order.end(), [](const EfficiencyTerm* a, const EfficiencyTerm* b) {
        return std::tie(a->value, a->name, a->rel_uncertainty) <
               std::tie(b->value, b->name, b->rel_uncertainty);
    });

    EfficiencyChain chain;
    chain.terms = terms;
    long double prod = 1.0L, lo = 1.0L, hi = 1.0L;
    double sumsq = 0.0;
    for (const EfficiencyTerm* t : order) {
        prod *= static_cast<long double>(t->value);
        sumsq += t->rel_uncertainty * t->rel_uncertainty;
        lo *= static_cast<long double>(
            std::max(0.0, t->value * (1.0 - t->rel_uncertainty)));
        hi *= static_cast<long double>(
            std::min(1.0, t->value * (1.0 + t->rel_uncertainty)));
    }
    chain.product = static_cast<double>(prod);
    chain.rel_uncertainty = std::sqrt(sumsq);
    chain.abs_uncertainty = chain.product * chain.rel_uncertainty;
    chain.interval_low = static_cast<double>(lo);
    chain.interval_high = static_cast<double>(hi);
    return chain;
}

// Load a chain from a config: [chain] terms = name1, name2, ... with one
// [term.<name>] section per term carrying value, rel_uncertainty, source.
inline std::vector<EfficiencyTerm> chain_terms_from_config(const Config& cfg) {
    const std::string list = cfg.get_string("chain", "terms");
    std::vector<EfficiencyTerm> terms;
    std::string name;
    auto flush = [&]() {
        if (name.empty()) return;
        EfficiencyTerm t;
        t.name = name;
        const std::string section = "term." + name;
        t.value = cfg.get_double(section, "value");
        t.rel_uncertainty = cfg.get_double(section, "rel_uncertainty", 0.0);
        t.source = term_source_from_string(cfg.get_string(section, "source", "manual"));
        t.validate();
        terms.push_back(std::move(t));
        name.clear();
    };
    for (char ch : list) {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            flush();
        } else {
            name.push_back(ch);
        }
    }
    flush();
    if (terms.empty()) throw config_error("chain config lists no terms");
    return terms;
}

// Fixed-format table report: one line per term plus totals.
inline std::string chain_report(const EfficiencyChain& chain) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s %12s %10s %10s\n", "term", "value", "rel_unc",
                  "source");
    out += buf;
    for (const auto& t : chain.terms) {
        std::snprintf(buf, sizeof buf, "%-24s %12.6g %10.4g %10s\n", t.name.c_str(), t.value,
                      t.rel_uncertainty, term_source_name(t.source));
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-24s %12.6g %10.4g\n", "product", chain.product,
                  chain.rel_uncertainty);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-24s [%.6g, %.6g]\n", "interval", chain.interval_low,
                  chain.interval_high);
    out += buf;
    return out;
}

}  // namespace wgbs
