#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"
#include "lpvcert/parallel.hpp"
#include "lpvcert/pbh.hpp"
#include "lpvcert/rng.hpp"
#include "lpvcert/system_model.hpp"

namespace lpvcert {

/// Spectral constants and the admissible perturbation bounds derived from
/// them. delta is the radius for the stacked-and-weighted uncertainty block,
/// block_bound the induced bound on the stacked block alone.
struct RadiusResult {
    Property property = Property::Controllability;
    double eps_c0 = 0.0;
    double delta_c0 = 0.0;
    double delta = 0.0;
    double block_bound = 0.0;
    double omega_truncation = 0.0;
    double sup_tuple_norm_sq = 0.0;
    bool hermitian_shortcut = false;
    std::size_t omega_samples = 0;
    std::size_t boundary_samples = 0;
    std::size_t interior_samples = 0;
};

struct ViolationWitness {
    ParameterPoint point;
    DeltaAssignment delta;
    cplx s0;
    double sigma_min = 0.0;
    double threshold = 0.0;
    double pert_norm = 0.0;
};

struct RadiusOptions {
    double tol = kDefaultTol;
    std::size_t omega_points = 129;   // per half axis; the full sweep uses 2*k-1
    std::size_t grid_points = 9;      // boundary/interior sampling density
    unsigned jobs = 1;
    GridSpec precheck_grid = {};
};

namespace detail {

inline std::pair<Channel, Channel> property_pair(Property p) {
    switch (p) {
        case Property::Controllability:
        case Property::Stabilizability:
            return {Channel::A, Channel::B};
        case Property::Observability:
        case Property::Detectability:
            return {Channel::A, Channel::C};
        default:
            throw Error("radius machinery handles controllability/observability style properties only");
    }
}

/// Nominal frequency-sweep matrix whose singular values drive the spectral
/// constants: (iw I - A : B) for the input pair, (iw I - A^* : C^*) for the
/// output pair (same singular values as the stacked observability matrix).
inline ComplexMatrix nominal_sweep_matrix(const LpvSystem& sys, Property prop, double omega,
                                          const ParameterPoint& pt) {
    const ComplexMatrix a = sys.famA.evaluate(pt.zA);
    const cplx iw{0.0, omega};
    const auto pair = property_pair(prop);
    if (pair.second == Channel::B) {
        ComplexMatrix si = ComplexMatrix::identity(sys.n) * iw - a;
        return hcat(si, sys.famB.evaluate(pt.zB));
    }
    ComplexMatrix si = ComplexMatrix::identity(sys.n) * iw - a.adjoint();
    return hcat(si, sys.famC.evaluate(pt.zC).adjoint());
}

/// Samples of the relevant channel coordinates: box faces at grid density,
/// plus the full interior grid. Irrelevant channels sit at their interval
/// midpoints. A fully degenerate box yields its single point for both sets.
struct DomainSamples {
    std::vector<ParameterPoint> boundary;
    std::vector<ParameterPoint> interior;
};

inline DomainSamples sample_domain(const LpvSystem& sys, const BoxDomain& domain, Property prop,
                                   std::size_t grid_points) {
    const auto axes = domain_axes(sys, domain);
    const auto pair = property_pair(prop);

    std::vector<std::size_t> active;  // indices of non-degenerate relevant axes
    std::vector<double> base(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) {
        base[a] = 0.5 * (axes[a].lo + axes[a].hi);
        const bool relevant = axes[a].channel == pair.first || axes[a].channel == pair.second;
        if (relevant && !axes[a].degenerate())
            active.push_back(a);
    }

    auto grid_coords = [&](std::size_t axis) {
        std::vector<double> g;
        const std::size_t count = std::max<std::size_t>(grid_points, 2);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(count - 1);
            g.push_back(axes[axis].lo + t * (axes[axis].hi - axes[axis].lo));
        }
        g.back() = axes[axis].hi;
        return g;
    };

    DomainSamples out;
    if (active.empty()) {
        out.boundary.push_back(point_from_coords(sys, axes, base));
        out.interior = out.boundary;
        return out;
    }

    auto enumerate = [&](const std::vector<std::size_t>& free_axes, auto&& emit) {
        std::vector<std::vector<double>> grids;
        grids.reserve(free_axes.size());
        std::size_t total = 1;
        for (std::size_t a : free_axes) {
            grids.push_back(grid_coords(a));
            total *= grids.back().size();
        }
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::vector<double> coords = base;
            std::size_t rem = idx;
            for (std::size_t k = 0; k < free_axes.size(); ++k) {
                coords[free_axes[k]] = grids[k][rem % grids[k].size()];
                rem /= grids[k].size();
            }
            emit(coords);
        }
    };

    // Faces: each active axis pinned to an endpoint, the others gridded.
    for (std::size_t f = 0; f < active.size(); ++f) {
        std::vector<std::size_t> rest;
        for (std::size_t k = 0; k < active.size(); ++k)
            if (k != f)
                rest.push_back(active[k]);
        for (double endpoint : {axes[active[f]].lo, axes[active[f]].hi}) {
            enumerate(rest, [&](std::vector<double> coords) {
                coords[active[f]] = endpoint;
                out.boundary.push_back(point_from_coords(sys, axes, coords));
            });
        }
    }
    enumerate(active, [&](const std::vector<double>& coords) {
        out.interior.push_back(point_from_coords(sys, axes, coords));
    });
    return out;
}

}  // namespace detail

struct BoundConstants {
    double eps_c0 = 0.0;
    double delta_c0 = 0.0;
    double omega = 0.0;
    bool hermitian_shortcut = false;
    std::size_t omega_samples = 0;
    std::size_t boundary_samples = 0;
    std::size_t interior_samples = 0;
};

/// Extreme eigenvalues of the nominal Hermitian products over the truncated
/// imaginary axis and the sampled domain boundary. The lower constant also
/// scans the interior grid. Throws NominalPropertyFails when the nominal
/// system does not pass the property sweep on the domain.
inline BoundConstants bound_constants(const LpvSystem& sys, const BoxDomain& domain, Property property,
                                      const RadiusOptions& opts = {}) {
    GridSpec precheck = opts.precheck_grid;
    precheck.jobs = opts.jobs;
    PropertyCheckOptions check;
    check.tol = opts.tol;
    const DomainReport nominal = sweep_domain(sys, property, domain, precheck, check);
    if (nominal.verdict != Verdict::Certified)
        throw NominalPropertyFailsError(std::string("nominal system is not ") + property_name(property) +
                                        " on the domain (sweep verdict: " + verdict_name(nominal.verdict) + ")");

    const auto samples = detail::sample_domain(sys, domain, property, opts.grid_points);

    double sup_norm_a = 0.0;
    bool hermitian = true;
    for (const auto& pt : samples.boundary) {
        const ComplexMatrix a = sys.famA.evaluate(pt.zA);
        sup_norm_a = std::max(sup_norm_a, spectral_norm(a));
        hermitian = hermitian && is_hermitian(a);
    }
    const double omega_max = 2.0 * (1.0 + sup_norm_a);

    std::vector<double> omegas;
    const std::size_t half = std::max<std::size_t>(opts.omega_points, 2);
    for (std::size_t i = 0; i < half; ++i)
        omegas.push_back(omega_max * static_cast<double>(i) / static_cast<double>(half - 1));
    if (!hermitian) {
        std::vector<double> full;
        for (auto it = omegas.rbegin(); it != omegas.rend(); ++it)
            if (*it != 0.0)
                full.push_back(-*it);
        full.insert(full.end(), omegas.begin(), omegas.end());
        omegas = std::move(full);
    }

    struct Extremes {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
    };
    auto scan = [&](const std::vector<ParameterPoint>& pts) {
        std::vector<Extremes> slots(pts.size());
        parallel_for(pts.size(), opts.jobs, [&](std::size_t i) {
            Extremes e;
            for (double w : omegas) {
                const auto sv = svd_extremes(detail::nominal_sweep_matrix(sys, property, w, pts[i]));
                e.lo = std::min(e.lo, sv.sigma_min * sv.sigma_min);
                e.hi = std::max(e.hi, sv.sigma_max * sv.sigma_max);
            }
            slots[i] = e;
        });
        Extremes total;
        for (const auto& e : slots) {
            total.lo = std::min(total.lo, e.lo);
            total.hi = std::max(total.hi, e.hi);
        }
        return total;
    };

    const Extremes on_boundary = scan(samples.boundary);
    const Extremes in_interior = scan(samples.interior);

    BoundConstants out;
    out.eps_c0 = std::min(on_boundary.lo, in_interior.lo);
    out.delta_c0 = on_boundary.hi;
    out.omega = omega_max;
    out.hermitian_shortcut = hermitian;
    out.omega_samples = omegas.size();
    out.boundary_samples = samples.boundary.size();
    out.interior_samples = samples.interior.size();
    return out;
}

/// Property-preservation radius from the spectral constants:
/// delta = sqrt(delta_c0^2 + eps_c0) - delta_c0, and the per-block bound
/// divides by the exact corner supremum of the weighted tuple norms (the
/// implicit leading 1 of each tuple included).
inline RadiusResult preservation_radius(const LpvSystem& sys, const BoxDomain& domain, Property property,
                                        const RadiusOptions& opts = {}) {
    const BoundConstants bc = bound_constants(sys, domain, property, opts);
    const auto pair = detail::property_pair(property);

    RadiusResult r;
    r.property = property;
    r.eps_c0 = bc.eps_c0;
    r.delta_c0 = bc.delta_c0;
    r.omega_truncation = bc.omega;
    r.hermitian_shortcut = bc.hermitian_shortcut;
    r.omega_samples = bc.omega_samples;
    r.boundary_samples = bc.boundary_samples;
    r.interior_samples = bc.interior_samples;
    r.delta = std::sqrt(bc.delta_c0 * bc.delta_c0 + bc.eps_c0) - bc.delta_c0;
    r.sup_tuple_norm_sq = sup_tuple_norm_sq(domain.segment(pair.first)) + sup_tuple_norm_sq(domain.segment(pair.second));
    r.block_bound = r.delta / std::sqrt(r.sup_tuple_norm_sq);
    return r;
}

/// Norm of the stacked uncertainty block relevant to the radius property.
inline double stacked_norm(const LpvSystem& sys, const DeltaAssignment& delta, Property property) {
    const auto pair = detail::property_pair(property);
    const ComplexMatrix stack =
        pair.second == Channel::B ? stacked_delta(sys, delta) : stacked_delta_observability(sys, delta);
    if (stack.is_zero())
        return 0.0;
    return spectral_norm(stack);
}

/// True when the stacked block norm lies strictly inside the block bound.
inline bool is_admissible(const DeltaAssignment& delta, const RadiusResult& radius, const LpvSystem& sys) {
    return stacked_norm(sys, delta, radius.property) < radius.block_bound;
}

struct ViolationOptions {
    double tol = kDefaultTol;
    std::size_t candidate_grid = 3;
    unsigned jobs = 1;
};

namespace detail {

struct ViolationCandidate {
    bool found = false;
    ViolationWitness witness;
};

/// Least-squares realization of a target channel perturbation through the
/// channel's structured blocks at the given point, via the vectorized
/// Kronecker system. Returns false when the residual exceeds tolerance.
inline bool realize_channel_target(const LpvSystem& sys, Channel ch, const ParameterPoint& point,
                                   const ComplexMatrix& target, double tol, DeltaAssignment& delta) {
    const auto& cp = sys.pert.channel(ch);
    if (cp.trivial())
        return target.is_zero(tol);
    const std::size_t ell = cp.right.rows();
    const auto ztail = point.tail(ch);

    std::size_t cols = 0;
    for (const auto& blk : cp.blocks) cols += blk.left.cols() * ell;
    ComplexMatrix k(target.rows() * target.cols(), cols);
    std::size_t col0 = 0;
    const ComplexMatrix e_t = cp.right.transpose();
    for (const auto& blk : cp.blocks) {
        const cplx w = weight_at(ztail, blk.index);
        // vec(D * Delta * E) = (D (x) E^T) vec(Delta) under row stacking.
        k.set_block(0, col0, kron(blk.left, e_t) * w);
        col0 += blk.left.cols() * ell;
    }
    const ComplexMatrix rhs = vec(target);
    const ComplexMatrix x = least_squares(k, rhs);
    const double residual = (k * x - rhs).frobenius_norm();
    if (residual > tol * std::max(1.0, target.frobenius_norm()))
        return false;

    auto& vals = delta.channel(ch);
    std::size_t row0 = 0;
    for (std::size_t b = 0; b < cp.blocks.size(); ++b) {
        const std::size_t len = cp.blocks[b].left.cols() * ell;
        vals[b] = unvec(x.block(row0, 0, len, 1), cp.blocks[b].left.cols(), ell);
        row0 += len;
    }
    return true;
}

inline std::vector<ParameterPoint> candidate_points(const LpvSystem& sys, const BoxDomain& domain,
                                                    std::size_t per_axis) {
    const auto axes = domain_axes(sys, domain);
    std::vector<std::vector<double>> grids(axes.size());
    std::size_t total = 1;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        if (axes[a].degenerate()) {
            grids[a] = {axes[a].lo};
        } else {
            const std::size_t count = std::max<std::size_t>(per_axis, 2);
            for (std::size_t i = 0; i < count; ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(count - 1);
                grids[a].push_back(axes[a].lo + t * (axes[a].hi - axes[a].lo));
            }
        }
        total *= grids[a].size();
    }
    std::vector<ParameterPoint> pts;
    pts.reserve(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::vector<double> coords(axes.size());
        std::size_t rem = idx;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            coords[a] = grids[a][rem % grids[a].size()];
            rem /= grids[a].size();
        }
        pts.push_back(point_from_coords(sys, axes, coords));
    }
    return pts;
}

}  // namespace detail

/// Constructs a structured perturbation destroying the property: pick an
/// eigenpair of the nominal dynamics at a domain point, project the paired
/// channel onto the eigenvector's orthogonal complement, and realize that
/// target through the structure by least squares. The returned witness is
/// re-verified through the PBH path before returning.
inline ViolationWitness construct_violation(const LpvSystem& sys, const BoxDomain& domain, Property property,
                                            const ViolationOptions& opts = {}) {
    if (property == Property::Minimality) {
        // Destroying either side destroys minimality; prefer the cheaper one.
        ViolationWitness best;
        bool have = false;
        for (Property p : {Property::Controllability, Property::Observability}) {
            try {
                ViolationWitness w = construct_violation(sys, domain, p, opts);
                if (!have || w.pert_norm < best.pert_norm) {
                    best = w;
                    have = true;
                }
            } catch (const NotExpressibleError&) {
            }
        }
        if (!have)
            throw NotExpressibleError();
        return best;
    }
    const auto pair = detail::property_pair(property);
    const bool input_side = pair.second == Channel::B;
    const bool rhp_only = property == Property::Stabilizability || property == Property::Detectability;

    const DeltaAssignment zero = zero_delta(sys);
    const auto points = detail::candidate_points(sys, domain, opts.candidate_grid);
    PropertyCheckOptions check;
    check.tol = opts.tol;

    for (const auto& pt : points)
        if (!check_property_at(sys, property, pt, zero, check).holds)
            throw NominalAlreadyViolatedError();

    ViolationWitness best;
    bool have = false;

    for (const auto& pt : points) {
        const ComplexMatrix a = sys.famA.evaluate(pt.zA);
        const ComplexMatrix paired = input_side ? sys.famB.evaluate(pt.zB) : sys.famC.evaluate(pt.zC);
        const auto loci = sorted_eigenvalues(a);
        for (const cplx& lambda : loci) {
            if (rhp_only && lambda.real() < 0.0)
                continue;
            // Left eigenvector for the input pair, right eigenvector for the
            // output pair; both make the paired channel's projection vanish.
            const ComplexMatrix shifted = input_side
                                              ? a.adjoint() - ComplexMatrix::identity(sys.n) * std::conj(lambda)
                                              : a - ComplexMatrix::identity(sys.n) * lambda;
            const ComplexMatrix q = min_singular_vector(shifted);

            DeltaAssignment delta = zero;
            bool ok;
            if (input_side) {
                const ComplexMatrix target = -(q * (q.adjoint() * paired));
                ok = detail::realize_channel_target(sys, Channel::B, pt, target, opts.tol, delta);
            } else {
                const ComplexMatrix target = -((paired * q) * q.adjoint());
                ok = detail::realize_channel_target(sys, Channel::C, pt, target, opts.tol, delta);
            }
            if (!ok)
                continue;

            const cplx s0 = input_side ? lambda : std::conj(lambda);
            const PbhKind kind = input_side ? PbhKind::Controllability : PbhKind::Observability;
            const auto probe = detail::probe_rank(sys, kind, s0, pt, delta, sys.n, opts.tol);
            if (probe.full_rank)
                continue;  // construction failed the independent re-check

            ViolationWitness w;
            w.point = pt;
            w.delta = delta;
            w.s0 = s0;
            w.sigma_min = probe.sigma_min;
            w.threshold = probe.threshold;
            w.pert_norm = stacked_norm(sys, delta, property);
            if (!have || w.pert_norm < best.pert_norm) {
                best = w;
                have = true;
            }
        }
    }
    if (!have)
        throw NotExpressibleError();
    return best;
}

struct SoundnessReport {
    bool all_held = true;
    std::size_t deltas_checked = 0;
    std::size_t points_per_delta = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
};

/// Samples random admissible perturbations (stacked norm <= fraction of the
/// block bound) and re-verifies the property at random domain points.
inline SoundnessReport sample_admissible_soundness(const LpvSystem& sys, const BoxDomain& domain,
                                                   const RadiusResult& radius, std::size_t n_deltas,
                                                   std::size_t n_points, Rng& rng, double tol = kDefaultTol,
                                                   double fraction = 0.99) {
    const auto pair = detail::property_pair(radius.property);
    SoundnessReport rep;
    rep.points_per_delta = n_points;
    PropertyCheckOptions check;
    check.tol = tol;

    const auto axes = detail::domain_axes(sys, domain);
    auto random_point = [&]() {
        std::vector<double> coords(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a)
            coords[a] = axes[a].degenerate() ? axes[a].lo : rng.uniform(axes[a].lo, axes[a].hi);
        return detail::point_from_coords(sys, axes, coords);
    };

    for (std::size_t d = 0; d < n_deltas; ++d) {
        DeltaAssignment delta = zero_delta(sys);
        for (Channel ch : {pair.first, pair.second}) {
            const auto& cp = sys.pert.channel(ch);
            if (cp.trivial())
                continue;
            auto& vals = delta.channel(ch);
            for (std::size_t b = 0; b < cp.blocks.size(); ++b)
                vals[b] = rng.matrix(cp.blocks[b].left.cols(), cp.right.rows(), -1.0, 1.0, true);
        }
        const double nrm = stacked_norm(sys, delta, radius.property);
        if (nrm == 0.0)
            continue;
        const double scale = fraction * radius.block_bound * rng.uniform(0.05, 1.0) / nrm;
        for (auto& chvals : delta.channels)
            for (auto& v : chvals) v *= cplx{scale, 0.0};

        ++rep.deltas_checked;
        for (std::size_t k = 0; k < n_points; ++k) {
            const auto verdict = check_property_at(sys, radius.property, random_point(), delta, check);
            rep.worst_margin = std::min(rep.worst_margin, verdict.margin());
            if (!verdict.holds)
                rep.all_held = false;
        }
    }
    return rep;
}

}  // namespace lpvcert
