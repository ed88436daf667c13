#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lpvcert/cover.hpp"
#include "lpvcert/delay.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"
#include "lpvcert/pbh.hpp"
#include "lpvcert/system_model.hpp"

namespace lpvcert {

struct DelaySearchBox {
    double sigma_lo = 0.0, sigma_hi = 0.0;
    double omega_lo = 0.0, omega_hi = 0.0;

    bool valid() const {
        return sigma_lo <= sigma_hi && omega_lo <= omega_hi && std::isfinite(sigma_lo) && std::isfinite(sigma_hi) &&
               std::isfinite(omega_lo) && std::isfinite(omega_hi);
    }
};

struct DelayDomainReport {
    Verdict verdict = Verdict::Inconclusive;
    Property property = Property::Controllability;
    bool independent_mode = false;
    double floor_value = 0.0;
    DelaySearchBox box;
    CoverResult cover;
    bool has_witness = false;
    cplx witness_s;
    ParameterPoint witness_point;
    LiftedExponents witness_lifted;
    /// Independent mode only: whether the witness exponents are realizable by
    /// some delays in the admissibility box; an unrealizable witness is
    /// reported but does not overturn the delays.
    bool witness_feasible_for_delays = false;
    bool spurious_for_delays = false;
    double witness_value = 0.0;
};

struct DelayTestOptions {
    CoverOptions cover;
    double tol = kDefaultTol;
    const DelayDeltaAssignment* delta = nullptr;
};

namespace detail {

enum class Seg { A, B, C, D, Ad, Bd };

struct DelayAxis {
    Seg seg;
    std::size_t coord;
    bool imag_part;
    double lo, hi;
};

inline const std::vector<BoxDomain::ComplexInterval>& domain_segment(const BoxDomain& d, Seg s) {
    switch (s) {
        case Seg::A: return d.zA;
        case Seg::B: return d.zB;
        case Seg::C: return d.zC;
        case Seg::D: return d.zD;
        case Seg::Ad: return d.zAd;
        case Seg::Bd: return d.zBd;
    }
    return d.zA;
}

inline std::vector<cplx>& point_segment(ParameterPoint& p, Seg s) {
    switch (s) {
        case Seg::A: return p.zA;
        case Seg::B: return p.zB;
        case Seg::C: return p.zC;
        case Seg::D: return p.zD;
        case Seg::Ad: return p.zAd;
        case Seg::Bd: return p.zBd;
    }
    return p.zA;
}

inline std::vector<Seg> relevant_segments(Property prop) {
    switch (prop) {
        case Property::Controllability:
        case Property::Stabilizability:
            return {Seg::A, Seg::B, Seg::Ad, Seg::Bd};
        case Property::Observability:
        case Property::Detectability:
            return {Seg::A, Seg::C, Seg::Ad};
        case Property::OutputControllability:
            return {Seg::A, Seg::B, Seg::C, Seg::D, Seg::Ad, Seg::Bd};
        default:
            throw Error("delay tests support controllability/observability style properties only");
    }
}

inline PbhKind delay_kind(Property prop) {
    switch (prop) {
        case Property::Controllability:
        case Property::Stabilizability:
            return PbhKind::Controllability;
        case Property::Observability:
        case Property::Detectability:
            return PbhKind::Observability;
        case Property::OutputControllability:
            return PbhKind::OutputControllability;
        default:
            throw Error("delay tests support controllability/observability style properties only");
    }
}

inline bool uses_input_side(Property prop) {
    return prop != Property::Observability && prop != Property::Detectability;
}

inline bool restrict_to_rhp(Property prop) {
    return prop == Property::Stabilizability || prop == Property::Detectability;
}

struct DelayCoordMap {
    std::vector<DelayAxis> axes;       // parameter part, after sigma/omega and any lifted coords
    ParameterPoint base_point;         // midpoints for every segment
    std::size_t lifted_internal = 0;   // count of (rho, phi) pairs before the axes
    std::size_t lifted_external = 0;

    ParameterPoint point_at(std::span<const double> coords, std::size_t offset) const {
        ParameterPoint pt = base_point;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            auto& seg = point_segment(pt, axes[a].seg);
            cplx& z = seg[axes[a].coord];
            if (axes[a].imag_part)
                z = {z.real(), coords[offset + a]};
            else
                z = {coords[offset + a], z.imag()};
        }
        return pt;
    }
};

inline DelayCoordMap build_coord_map(const DelaySystem& dsys, const BoxDomain& domain, Property prop) {
    if (!domain.valid())
        throw UnboundedDomainError();
    const std::size_t expected[] = {dsys.base.qA(), dsys.base.qB(), dsys.base.qC(),
                                    dsys.base.qD(), dsys.q_ad,      dsys.q_bd};
    const Seg all[] = {Seg::A, Seg::B, Seg::C, Seg::D, Seg::Ad, Seg::Bd};
    DelayCoordMap map;
    for (std::size_t si = 0; si < 6; ++si) {
        const auto& seg = domain_segment(domain, all[si]);
        if (seg.size() != expected[si])
            throw LengthMismatchError("domain segment length does not match the delay system");
        auto& tails = point_segment(map.base_point, all[si]);
        tails.resize(seg.size());
        for (std::size_t k = 0; k < seg.size(); ++k)
            tails[k] = {0.5 * (seg[k].re_lo + seg[k].re_hi), 0.5 * (seg[k].im_lo + seg[k].im_hi)};
    }
    for (Seg s : relevant_segments(prop)) {
        const auto& seg = domain_segment(domain, s);
        for (std::size_t k = 0; k < seg.size(); ++k) {
            map.axes.push_back({s, k, false, seg[k].re_lo, seg[k].re_hi});
            map.axes.push_back({s, k, true, seg[k].im_lo, seg[k].im_hi});
        }
    }
    return map;
}

/// det of the Hermitian product of the test matrix (rows or columns side,
/// whichever is square of smaller size); real and nonnegative up to rounding.
inline double hermitian_product_det(const ComplexMatrix& z) {
    const Eigen::MatrixXcd ze = to_eigen(z);
    Eigen::MatrixXcd g;
    if (ze.rows() <= ze.cols())
        g = ze * ze.adjoint();
    else
        g = ze.adjoint() * ze;
    return g.determinant().real();
}

}  // namespace detail

/// Self-consistent default (sigma, omega) search window: rank loss needs s in
/// the spectrum of the delayed dynamics, whose norm is bounded through the
/// delay exponentials evaluated at the first-pass radius.
inline DelaySearchBox default_search_box(const DelaySystem& dsys, const BoxDomain& domain, Property property) {
    const auto map = detail::build_coord_map(dsys, domain, property);
    // Coarse corner/midpoint scan of the norms.
    double sup_a = 0.0;
    std::vector<double> sup_entries(dsys.internal_entries.size(), 0.0);
    const std::size_t probes = map.axes.empty() ? 1 : 3;
    std::vector<double> coords(map.axes.size());
    for (std::size_t pick = 0; pick < probes; ++pick) {
        for (std::size_t a = 0; a < map.axes.size(); ++a) {
            const auto& ax = map.axes[a];
            coords[a] = pick == 0 ? 0.5 * (ax.lo + ax.hi) : (pick == 1 ? ax.lo : ax.hi);
        }
        const ParameterPoint pt = map.point_at(coords, 0);
        sup_a = std::max(sup_a, spectral_norm(dsys.base.famA.evaluate(pt.zA)));
        for (std::size_t j = 0; j < dsys.internal_entries.size(); ++j)
            sup_entries[j] = std::max(sup_entries[j], spectral_norm(dsys.internal_entries[j].fam.evaluate(pt.zAd)));
    }
    double r0 = sup_a;
    for (double s : sup_entries) r0 += s;
    double r1 = sup_a;
    for (std::size_t j = 0; j < sup_entries.size(); ++j) {
        const double expo = std::min(dsys.internal_entries[j].bound * r0, 30.0);
        r1 += std::exp(expo) * sup_entries[j];
    }
    const double r = r1 + 0.5;
    DelaySearchBox box{-r, r, -r, r};
    if (detail::restrict_to_rhp(property))
        box.sigma_lo = 0.0;
    return box;
}

/// Whether some admissible delays realize the lifted exponents: the decay
/// constraints must admit a common rate (interval intersection of the
/// per-index log ratios), and each phase must be reachable component-wise.
inline bool delay_feasible(const std::vector<double>& rho, const std::vector<double>& phi,
                           const std::vector<double>& bounds, double tol = 1e-6) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool zero_locked = false;
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t j = 0; j < rho.size(); ++j) {
        const double r = rho[j];
        double pdist = std::fmod(std::abs(phi[j]), two_pi);
        pdist = std::min(pdist, two_pi - pdist);
        if (std::abs(r - 1.0) <= tol) {
            if (pdist <= tol)
                continue;  // h_j = 0 realizes it for any rate
            if (bounds[j] <= 0.0)
                return false;
            zero_locked = true;  // needs sigma = 0 with positive delay
            continue;
        }
        if (bounds[j] <= 0.0)
            return false;  // exponent must be 1 when the delay is pinned at 0
        const double edge = -std::log(r) / bounds[j];
        if (r < 1.0)
            lo = std::max(lo, edge);
        else
            hi = std::min(hi, edge);
    }
    if (zero_locked)
        return lo <= tol && -tol <= hi;
    return lo <= hi + tol;
}

/// Certifies the property for every delay value in the admissibility box by
/// treating the delay exponentials as free polar coordinates over the set
/// they can reach from the search window. Witnesses are screened against the
/// inverse-mapping constraints: one that no admissible delay can realize is
/// reported as spurious and leaves the verdict inconclusive.
inline DelayDomainReport delay_independent_test(const DelaySystem& dsys, const BoxDomain& domain,
                                                const DelaySearchBox& sbox, Property property, double floor_value,
                                                std::size_t budget, const DelayTestOptions& opts = {}) {
    if (!sbox.valid())
        throw UnboundedSearchBoxError();
    DelaySearchBox box = sbox;
    if (detail::restrict_to_rhp(property))
        box.sigma_lo = std::max(box.sigma_lo, 0.0);

    const auto map = detail::build_coord_map(dsys, domain, property);
    const bool input_side = detail::uses_input_side(property);
    const std::size_t n_int = dsys.eta();
    const std::size_t n_ext = input_side ? dsys.kappa() : 0;
    const double two_pi = 2.0 * std::numbers::pi;

    CoverBox cbox;
    cbox.push(box.sigma_lo, box.sigma_hi);
    cbox.push(box.omega_lo, box.omega_hi);
    auto push_polar = [&](double bound) {
        const double rho_lo = std::exp(-bound * box.sigma_hi);
        const double rho_hi = std::exp(-bound * box.sigma_lo);
        cbox.push(std::min(rho_lo, rho_hi), std::max(rho_lo, rho_hi));
        cbox.push(0.0, bound == 0.0 ? 0.0 : two_pi);
    };
    for (std::size_t j = 0; j < n_int; ++j) push_polar(dsys.internal_entries[j].bound);
    for (std::size_t k = 0; k < n_ext; ++k) push_polar(dsys.external_entries[k].bound);

    const std::size_t param_offset = 2 + 2 * (n_int + n_ext);
    for (const auto& ax : map.axes) cbox.push(ax.lo, ax.hi);

    const DelayDeltaAssignment zero = zero_delay_delta(dsys);
    const DelayDeltaAssignment& delta = opts.delta ? *opts.delta : zero;
    const PbhKind kind = detail::delay_kind(property);

    auto decode = [&](std::span<const double> c, cplx& s, LiftedExponents& lifted, ParameterPoint& pt) {
        s = {c[0], c[1]};
        lifted = LiftedExponents{};
        for (std::size_t j = 0; j < n_int; ++j) {
            lifted.rho.push_back(c[2 + 2 * j]);
            lifted.phi.push_back(c[3 + 2 * j]);
        }
        for (std::size_t k = 0; k < dsys.kappa(); ++k) {
            if (input_side) {
                lifted.rho2.push_back(c[2 + 2 * n_int + 2 * k]);
                lifted.phi2.push_back(c[3 + 2 * n_int + 2 * k]);
            } else {
                lifted.rho2.push_back(1.0);
                lifted.phi2.push_back(0.0);
            }
        }
        pt = map.point_at(c, param_offset);
    };

    CoverFn f = [&](std::span<const double> c) {
        cplx s;
        LiftedExponents lifted;
        ParameterPoint pt;
        decode(c, s, lifted, pt);
        return detail::hermitian_product_det(assemble_lifted_pbh(dsys, kind, s, pt, delta, lifted));
    };

    DelayDomainReport rep;
    rep.property = property;
    rep.independent_mode = true;
    rep.floor_value = floor_value;
    rep.box = box;
    rep.cover = certify_positive(f, cbox, floor_value, budget, opts.cover);

    switch (rep.cover.outcome) {
        case CoverOutcome::Certified:
            rep.verdict = Verdict::Certified;
            break;
        case CoverOutcome::Inconclusive:
            rep.verdict = Verdict::Inconclusive;
            break;
        case CoverOutcome::Witness: {
            rep.has_witness = true;
            rep.witness_value = rep.cover.witness_value;
            decode(rep.cover.witness_point, rep.witness_s, rep.witness_lifted, rep.witness_point);
            std::vector<double> bounds_all;
            for (const auto& e : dsys.internal_entries) bounds_all.push_back(e.bound);
            std::vector<double> rho_all = rep.witness_lifted.rho, phi_all = rep.witness_lifted.phi;
            if (input_side) {
                for (const auto& e : dsys.external_entries) bounds_all.push_back(e.bound);
                rho_all.insert(rho_all.end(), rep.witness_lifted.rho2.begin(), rep.witness_lifted.rho2.end());
                phi_all.insert(phi_all.end(), rep.witness_lifted.phi2.begin(), rep.witness_lifted.phi2.end());
            }
            rep.witness_feasible_for_delays = delay_feasible(rho_all, phi_all, bounds_all, std::max(opts.tol, 1e-6));
            rep.spurious_for_delays = !rep.witness_feasible_for_delays;
            rep.verdict = rep.witness_feasible_for_delays ? Verdict::ViolatedWithWitness : Verdict::Inconclusive;
            break;
        }
    }
    return rep;
}

/// Certifies (or refutes) the property for concrete delay tuples by scanning
/// s directly over the search window; the inverse-mapping constraints hold by
/// construction.
inline DelayDomainReport delay_dependent_test(const DelaySystem& dsys, const BoxDomain& domain,
                                              const std::vector<double>& h, const std::vector<double>& h2,
                                              const DelaySearchBox& sbox, Property property, double floor_value,
                                              std::size_t budget, const DelayTestOptions& opts = {}) {
    if (!sbox.valid())
        throw UnboundedSearchBoxError();
    detail::check_delays(dsys.internal_entries, h);
    detail::check_delays(dsys.external_entries, h2);
    DelaySearchBox box = sbox;
    if (detail::restrict_to_rhp(property))
        box.sigma_lo = std::max(box.sigma_lo, 0.0);

    const auto map = detail::build_coord_map(dsys, domain, property);
    CoverBox cbox;
    cbox.push(box.sigma_lo, box.sigma_hi);
    cbox.push(box.omega_lo, box.omega_hi);
    for (const auto& ax : map.axes) cbox.push(ax.lo, ax.hi);

    const DelayDeltaAssignment zero = zero_delay_delta(dsys);
    const DelayDeltaAssignment& delta = opts.delta ? *opts.delta : zero;
    const PbhKind kind = detail::delay_kind(property);

    CoverFn f = [&](std::span<const double> c) {
        const cplx s{c[0], c[1]};
        const ParameterPoint pt = map.point_at(c, 2);
        return detail::hermitian_product_det(assemble_delay_pbh(dsys, kind, s, pt, delta, h, h2));
    };

    DelayDomainReport rep;
    rep.property = property;
    rep.independent_mode = false;
    rep.floor_value = floor_value;
    rep.box = box;
    rep.cover = certify_positive(f, cbox, floor_value, budget, opts.cover);
    switch (rep.cover.outcome) {
        case CoverOutcome::Certified:
            rep.verdict = Verdict::Certified;
            break;
        case CoverOutcome::Inconclusive:
            rep.verdict = Verdict::Inconclusive;
            break;
        case CoverOutcome::Witness:
            rep.has_witness = true;
            rep.witness_value = rep.cover.witness_value;
            rep.witness_s = {rep.cover.witness_point[0], rep.cover.witness_point[1]};
            rep.witness_point = map.point_at(rep.cover.witness_point, 2);
            rep.witness_feasible_for_delays = true;
            rep.verdict = Verdict::ViolatedWithWitness;
            break;
    }
    return rep;
}

}  // namespace lpvcert
