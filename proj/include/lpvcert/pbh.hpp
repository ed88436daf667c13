#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "lpvcert/complex_matrix.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"
#include "lpvcert/parallel.hpp"
#include "lpvcert/system_model.hpp"

namespace lpvcert {

enum class PbhKind { Controllability, Observability, OutputControllability, SystemMatrix };

enum class Property { Controllability, Observability, OutputControllability, Stabilizability, Detectability, Minimality };

inline const char* property_name(Property p) {
    switch (p) {
        case Property::Controllability: return "controllability";
        case Property::Observability: return "observability";
        case Property::OutputControllability: return "output-controllability";
        case Property::Stabilizability: return "stabilizability";
        case Property::Detectability: return "detectability";
        case Property::Minimality: return "minimality";
    }
    return "?";
}

enum class ZeroKind {
    InputDecoupling,
    OutputDecoupling,
    InputOutputDecoupling,
    ExternalInputDecoupling,
    Invariant,
    Transmission
};

inline const char* zero_kind_name(ZeroKind k) {
    switch (k) {
        case ZeroKind::InputDecoupling: return "input-decoupling";
        case ZeroKind::OutputDecoupling: return "output-decoupling";
        case ZeroKind::InputOutputDecoupling: return "input-output-decoupling";
        case ZeroKind::ExternalInputDecoupling: return "external-input-decoupling";
        case ZeroKind::Invariant: return "invariant";
        case ZeroKind::Transmission: return "transmission";
    }
    return "?";
}

/// Spectral test matrix of the requested kind, assembled from the evaluated
/// nominal families plus structured perturbations.
///
/// Controllability:        (s I - A - At : B + Bt),              n x (n+m)
/// Observability:          (s I - A^* - At^* : C^* + Ct^*)^*,    (n+p) x n
/// Output controllability: ((C+Ct)(s I - A - At) : (C+Ct)(B+Bt) + D + Dt), p x (n+m)
/// System matrix:          [s I - A - At, -(B+Bt); C+Ct, D+Dt],  (n+p) x (n+m)
inline ComplexMatrix assemble_pbh(const LpvSystem& sys, PbhKind kind, cplx s, const ParameterPoint& point,
                                  const DeltaAssignment& delta) {
    const ComplexMatrix a_tot = channel_total(sys, Channel::A, point, delta);
    switch (kind) {
        case PbhKind::Controllability: {
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * s - a_tot;
            return hcat(si, channel_total(sys, Channel::B, point, delta));
        }
        case PbhKind::Observability: {
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * std::conj(s) - a_tot;
            return vcat(si, channel_total(sys, Channel::C, point, delta));
        }
        case PbhKind::OutputControllability: {
            const ComplexMatrix c_tot = channel_total(sys, Channel::C, point, delta);
            const ComplexMatrix b_tot = channel_total(sys, Channel::B, point, delta);
            const ComplexMatrix d_tot = channel_total(sys, Channel::D, point, delta);
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * s - a_tot;
            return hcat(c_tot * si, c_tot * b_tot + d_tot);
        }
        case PbhKind::SystemMatrix: {
            const ComplexMatrix b_tot = channel_total(sys, Channel::B, point, delta);
            const ComplexMatrix c_tot = channel_total(sys, Channel::C, point, delta);
            const ComplexMatrix d_tot = channel_total(sys, Channel::D, point, delta);
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * s - a_tot;
            ComplexMatrix out(sys.n + sys.p, sys.n + sys.m);
            out.set_block(0, 0, si);
            out.set_block(0, sys.n, -b_tot);
            out.set_block(sys.n, 0, c_tot);
            out.set_block(sys.n, sys.n, d_tot);
            return out;
        }
    }
    throw Error("unknown PBH kind");
}

/// Eigenvalues of the perturbed dynamics matrix at the point: the only
/// candidate rank-loss locations for the state-side tests.
inline std::vector<cplx> eigen_loci(const LpvSystem& sys, const ParameterPoint& point, const DeltaAssignment& delta) {
    auto ev = eigenvalues(channel_total(sys, Channel::A, point, delta));
    std::sort(ev.begin(), ev.end(), [](const cplx& a, const cplx& b) {
        if (a.real() != b.real())
            return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return ev;
}

/// Zero taxonomy at a fixed complex frequency s0.
inline std::set<ZeroKind> classify_zeros(const LpvSystem& sys, cplx s0, const ParameterPoint& point,
                                         const DeltaAssignment& delta, double tol = kDefaultTol) {
    const std::size_t rc = numerical_rank(assemble_pbh(sys, PbhKind::Controllability, s0, point, delta), tol);
    const std::size_t ro = numerical_rank(assemble_pbh(sys, PbhKind::Observability, s0, point, delta), tol);
    const std::size_t roc = numerical_rank(assemble_pbh(sys, PbhKind::OutputControllability, s0, point, delta), tol);
    const std::size_t rs = numerical_rank(assemble_pbh(sys, PbhKind::SystemMatrix, s0, point, delta), tol);

    std::set<ZeroKind> out;
    const bool in_dec = rc < sys.n;
    const bool out_dec = ro < sys.n;
    if (in_dec)
        out.insert(ZeroKind::InputDecoupling);
    if (out_dec)
        out.insert(ZeroKind::OutputDecoupling);
    if (in_dec && out_dec)
        out.insert(ZeroKind::InputOutputDecoupling);
    if (roc < sys.p)
        out.insert(ZeroKind::ExternalInputDecoupling);
    const bool invariant = rs < sys.n + std::min(sys.m, sys.p);
    if (invariant)
        out.insert(ZeroKind::Invariant);
    if (invariant && !in_dec && !out_dec)
        out.insert(ZeroKind::Transmission);
    // Taxonomy: a transmission zero is an invariant zero that decouples nothing.
    if (out.count(ZeroKind::Transmission) &&
        (!out.count(ZeroKind::Invariant) || out.count(ZeroKind::InputDecoupling) ||
         out.count(ZeroKind::OutputDecoupling)))
        throw Error("zero taxonomy violated");
    return out;
}

struct Witness {
    cplx s;
    ParameterPoint point;
    double sigma_min = 0.0;
    double threshold = 0.0;
};

struct PropertyVerdict {
    Property property = Property::Controllability;
    bool holds = false;
    /// Smallest relevant singular value seen over the tested set; +inf when
    /// the test set was empty (vacuously true).
    double min_sigma = std::numeric_limits<double>::infinity();
    double threshold_at_min = 0.0;
    bool vacuous = false;
    /// Set when the tested frequencies are only a subset of the ones the full
    /// test would require (output controllability with rank-deficient C).
    bool sufficient_only = false;
    std::vector<Witness> witnesses;

    double margin() const {
        if (vacuous)
            return std::numeric_limits<double>::infinity();
        return threshold_at_min > 0.0 ? min_sigma / threshold_at_min : std::numeric_limits<double>::infinity();
    }
};

struct PropertyCheckOptions {
    double tol = kDefaultTol;
    /// Extra frequencies for the output-controllability test when the output
    /// matrix is rank deficient.
    std::vector<cplx> s_grid;
};

namespace detail {

struct RankProbe {
    cplx s;
    double sigma_min;
    double threshold;
    bool full_rank;
};

inline RankProbe probe_rank(const LpvSystem& sys, PbhKind kind, cplx s, const ParameterPoint& point,
                            const DeltaAssignment& delta, std::size_t required_rank, double tol) {
    const ComplexMatrix z = assemble_pbh(sys, kind, s, point, delta);
    const auto sv = singular_values(z);
    const double thr = rank_threshold(sv.front(), tol);
    const double smin = sv.at(required_rank - 1);
    return {s, smin, thr, smin > thr};
}

inline PropertyVerdict run_loci_test(const LpvSystem& sys, Property prop, PbhKind kind, std::size_t required_rank,
                                     const std::vector<cplx>& test_points, const ParameterPoint& point,
                                     const DeltaAssignment& delta, double tol) {
    PropertyVerdict v;
    v.property = prop;
    v.holds = true;
    if (test_points.empty()) {
        v.vacuous = true;
        return v;
    }
    double min_margin = std::numeric_limits<double>::infinity();
    for (const cplx& s : test_points) {
        const RankProbe r = probe_rank(sys, kind, s, point, delta, required_rank, tol);
        const double margin = r.sigma_min / r.threshold;
        if (!r.full_rank) {
            v.holds = false;
            v.witnesses.push_back({r.s, point, r.sigma_min, r.threshold});
        }
        if (margin < min_margin) {
            min_margin = margin;
            v.min_sigma = r.sigma_min;
            v.threshold_at_min = r.threshold;
        }
    }
    if (v.holds)
        v.witnesses.push_back({test_points.front(), point, v.min_sigma, v.threshold_at_min});
    return v;
}

}  // namespace detail

/// Decides one structural property at a fixed parameter point and fixed
/// uncertainty values. Rank decisions compare the relevant singular value
/// against tol * max(1, sigma_max) of the assembled matrix.
inline PropertyVerdict check_property_at(const LpvSystem& sys, Property property, const ParameterPoint& point,
                                         const DeltaAssignment& delta, const PropertyCheckOptions& opts = {}) {
    const double tol = opts.tol;
    const auto loci = eigen_loci(sys, point, delta);

    switch (property) {
        case Property::Controllability:
            return detail::run_loci_test(sys, property, PbhKind::Controllability, sys.n, loci, point, delta, tol);
        case Property::Observability: {
            // The stacked matrix loses rank when conj(s) is an eigenvalue of
            // the perturbed dynamics, so the candidate frequencies conjugate.
            std::vector<cplx> pts(loci.size());
            std::transform(loci.begin(), loci.end(), pts.begin(), [](const cplx& z) { return std::conj(z); });
            return detail::run_loci_test(sys, property, PbhKind::Observability, sys.n, pts, point, delta, tol);
        }
        case Property::Stabilizability: {
            std::vector<cplx> pts;
            for (const cplx& z : loci)
                if (z.real() >= 0.0)
                    pts.push_back(z);
            auto v = detail::run_loci_test(sys, property, PbhKind::Controllability, sys.n, pts, point, delta, tol);
            v.property = property;
            return v;
        }
        case Property::Detectability: {
            std::vector<cplx> pts;
            for (const cplx& z : loci)
                if (z.real() >= 0.0)
                    pts.push_back(std::conj(z));
            auto v = detail::run_loci_test(sys, property, PbhKind::Observability, sys.n, pts, point, delta, tol);
            v.property = property;
            return v;
        }
        case Property::OutputControllability: {
            const ComplexMatrix c_tot = channel_total(sys, Channel::C, point, delta);
            const bool c_full = numerical_rank(c_tot, tol) == sys.p;
            std::vector<cplx> pts = loci;
            bool sufficient_only = false;
            if (!c_full) {
                if (opts.s_grid.empty())
                    throw MissingSGridError();
                pts.insert(pts.end(), opts.s_grid.begin(), opts.s_grid.end());
                sufficient_only = true;
            }
            auto v = detail::run_loci_test(sys, property, PbhKind::OutputControllability, sys.p, pts, point, delta,
                                           tol);
            v.sufficient_only = sufficient_only;
            return v;
        }
        case Property::Minimality: {
            auto vc = check_property_at(sys, Property::Controllability, point, delta, opts);
            auto vo = check_property_at(sys, Property::Observability, point, delta, opts);
            PropertyVerdict v;
            v.property = property;
            v.holds = vc.holds && vo.holds;
            v.vacuous = vc.vacuous && vo.vacuous;
            const bool take_c = vc.margin() <= vo.margin();
            const PropertyVerdict& tight = take_c ? vc : vo;
            v.min_sigma = tight.min_sigma;
            v.threshold_at_min = tight.threshold_at_min;
            for (const auto& w : vc.witnesses) v.witnesses.push_back(w);
            for (const auto& w : vo.witnesses) v.witnesses.push_back(w);
            return v;
        }
    }
    throw Error("unknown property");
}

enum class Verdict { Certified, ViolatedWithWitness, Inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Certified: return "certified";
        case Verdict::ViolatedWithWitness: return "violated-with-witness";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct GridSpec {
    std::size_t points_per_dim = 9;
    std::size_t budget = 100000;
    int max_refine = 6;
    unsigned jobs = 1;
    /// A grid sweep certifies only when the worst margin clears this factor;
    /// margins in (1, factor] trigger refinement and end inconclusive.
    double certify_margin = 10.0;
};

struct DomainReport {
    Verdict verdict = Verdict::Inconclusive;
    Property property = Property::Controllability;
    std::size_t points_tested = 0;
    int refinement_depth = 0;
    double min_sigma = std::numeric_limits<double>::infinity();
    double threshold_at_min = 0.0;
    double min_margin = std::numeric_limits<double>::infinity();
    bool sufficient_only = false;
    std::vector<Witness> witnesses;
    double tol = kDefaultTol;
    std::size_t grid_points_per_dim = 0;
    std::size_t budget = 0;
};

namespace detail {

struct Axis {
    Channel channel;
    std::size_t coord;
    bool imag_part;
    double lo, hi;

    bool degenerate() const { return lo == hi; }
};

inline std::vector<Axis> domain_axes(const LpvSystem& sys, const BoxDomain& domain) {
    if (!domain.valid())
        throw UnboundedDomainError("domain has invalid or unbounded intervals");
    const std::size_t qs[4] = {sys.qA(), sys.qB(), sys.qC(), sys.qD()};
    std::vector<Axis> axes;
    for (Channel ch : kChannels) {
        const auto& seg = domain.segment(ch);
        if (seg.size() != qs[static_cast<std::size_t>(ch)])
            throw LengthMismatchError("domain segment length does not match system parameter count");
        for (std::size_t k = 0; k < seg.size(); ++k) {
            axes.push_back({ch, k, false, seg[k].re_lo, seg[k].re_hi});
            axes.push_back({ch, k, true, seg[k].im_lo, seg[k].im_hi});
        }
    }
    return axes;
}

inline ParameterPoint point_from_coords(const LpvSystem& sys, const std::vector<Axis>& axes,
                                        const std::vector<double>& coords) {
    ParameterPoint pt;
    pt.zA.assign(sys.qA(), cplx{});
    pt.zB.assign(sys.qB(), cplx{});
    pt.zC.assign(sys.qC(), cplx{});
    pt.zD.assign(sys.qD(), cplx{});
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const Axis& ax = axes[a];
        std::vector<cplx>* seg = nullptr;
        switch (ax.channel) {
            case Channel::A: seg = &pt.zA; break;
            case Channel::B: seg = &pt.zB; break;
            case Channel::C: seg = &pt.zC; break;
            case Channel::D: seg = &pt.zD; break;
        }
        cplx& z = (*seg)[ax.coord];
        if (ax.imag_part)
            z = {z.real(), coords[a]};
        else
            z = {coords[a], z.imag()};
    }
    return pt;
}

struct GridWindow {
    std::vector<double> lo, hi;  // per axis

    static GridWindow full(const std::vector<Axis>& axes) {
        GridWindow w;
        for (const auto& ax : axes) {
            w.lo.push_back(ax.lo);
            w.hi.push_back(ax.hi);
        }
        return w;
    }
};

inline std::vector<std::vector<double>> axis_grids(const GridWindow& win, std::size_t g) {
    std::vector<std::vector<double>> grids(win.lo.size());
    for (std::size_t a = 0; a < win.lo.size(); ++a) {
        if (win.lo[a] == win.hi[a]) {
            grids[a] = {win.lo[a]};
            continue;
        }
        const std::size_t count = std::max<std::size_t>(g, 2);
        grids[a].reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = static_cast<double>(i) / static_cast<double>(count - 1);
            grids[a].push_back(win.lo[a] + t * (win.hi[a] - win.lo[a]));
        }
        grids[a].back() = win.hi[a];
    }
    return grids;
}

}  // namespace detail

/// Grid sweep of one property over a bounded box. Uncertainty blocks stay at
/// the caller-fixed values. Certification here is the heuristic grid rule;
/// callers wanting a covering certificate use the cover-based path instead.
inline DomainReport sweep_domain(const LpvSystem& sys, Property property, const BoxDomain& domain,
                                 const GridSpec& grid = {}, const PropertyCheckOptions& check_opts = {},
                                 const DeltaAssignment* delta = nullptr) {
    const DeltaAssignment zero = zero_delta(sys);
    const DeltaAssignment& dv = delta ? *delta : zero;

    DomainReport report;
    report.property = property;
    report.tol = check_opts.tol;
    report.grid_points_per_dim = grid.points_per_dim;
    report.budget = grid.budget;

    const auto axes = detail::domain_axes(sys, domain);
    detail::GridWindow window = detail::GridWindow::full(axes);

    bool any_vacuous_only = true;
    double best_margin = std::numeric_limits<double>::infinity();
    std::vector<double> best_coords;
    bool budget_exhausted = false;

    for (int depth = 0;; ++depth) {
        const auto grids = detail::axis_grids(window, grid.points_per_dim);
        std::size_t total = 1;
        for (const auto& gvec : grids) total *= gvec.size();

        const std::size_t remaining = grid.budget > report.points_tested ? grid.budget - report.points_tested : 0;
        if (remaining == 0) {
            budget_exhausted = true;
            break;
        }
        const std::size_t count = std::min(total, remaining);
        if (count < total)
            budget_exhausted = true;

        struct Slot {
            PropertyVerdict verdict;
            std::vector<double> coords;
        };
        std::vector<Slot> slots(count);
        parallel_for(count, grid.jobs, [&](std::size_t idx) {
            std::vector<double> coords(axes.size());
            std::size_t rem = idx;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const auto& gvec = grids[a];
                coords[a] = gvec[rem % gvec.size()];
                rem /= gvec.size();
            }
            const ParameterPoint pt = detail::point_from_coords(sys, axes, coords);
            slots[idx].verdict = check_property_at(sys, property, pt, dv, check_opts);
            slots[idx].coords = std::move(coords);
        });
        report.points_tested += count;

        for (auto& slot : slots) {
            const auto& v = slot.verdict;
            report.sufficient_only = report.sufficient_only || v.sufficient_only;
            if (!v.vacuous)
                any_vacuous_only = false;
            if (!v.holds) {
                report.verdict = Verdict::ViolatedWithWitness;
                for (const auto& w : v.witnesses)
                    if (report.witnesses.size() < 8)
                        report.witnesses.push_back(w);
                if (v.min_sigma < report.min_sigma) {
                    report.min_sigma = v.min_sigma;
                    report.threshold_at_min = v.threshold_at_min;
                    report.min_margin = v.margin();
                }
            } else if (!v.vacuous && v.margin() < best_margin) {
                best_margin = v.margin();
                best_coords = slot.coords;
                report.min_sigma = v.min_sigma;
                report.threshold_at_min = v.threshold_at_min;
                report.min_margin = best_margin;
            }
        }
        if (report.verdict == Verdict::ViolatedWithWitness) {
            report.refinement_depth = depth;
            return report;
        }
        if (any_vacuous_only || best_margin > grid.certify_margin) {
            report.verdict = Verdict::Certified;
            report.refinement_depth = depth;
            if (report.witnesses.empty() && !best_coords.empty()) {
                const ParameterPoint pt = detail::point_from_coords(sys, axes, best_coords);
                report.witnesses.push_back({cplx{}, pt, report.min_sigma, report.threshold_at_min});
            }
            return report;
        }
        if (depth >= grid.max_refine || budget_exhausted) {
            report.refinement_depth = depth;
            break;
        }
        // Zoom around the tightest point with doubled density.
        detail::GridWindow refined = window;
        for (std::size_t a = 0; a < axes.size(); ++a) {
            if (window.lo[a] == window.hi[a])
                continue;
            const double step = (window.hi[a] - window.lo[a]) /
                                static_cast<double>(std::max<std::size_t>(grid.points_per_dim, 2) - 1);
            refined.lo[a] = std::max(axes[a].lo, best_coords[a] - step);
            refined.hi[a] = std::min(axes[a].hi, best_coords[a] + step);
        }
        window = refined;
    }

    report.verdict = Verdict::Inconclusive;
    return report;
}

}  // namespace lpvcert
