#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "lpvcert/cover.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"
#include "lpvcert/pbh.hpp"
#include "lpvcert/system_model.hpp"

namespace lpvcert {

/// One delayed family: the coefficient family shares the delay-channel
/// parameter tuple with its siblings, carries an optional structured
/// perturbation of its own, and an admissibility bound for its delay.
struct DelayedEntry {
    AffineMatrixFamily fam;
    ChannelPerturbation pert;
    double bound = 0.0;
};

struct DelaySystem {
    LpvSystem base;
    std::size_t q_ad = 0;
    std::size_t q_bd = 0;
    std::vector<DelayedEntry> internal_entries;  // state delays, families n x n
    std::vector<DelayedEntry> external_entries;  // input delays, families n x m

    std::size_t eta() const { return internal_entries.size(); }
    std::size_t kappa() const { return external_entries.size(); }
};

/// Uncertainty values for a delay system: base channels plus one block list
/// per delayed entry.
struct DelayDeltaAssignment {
    DeltaAssignment base;
    std::vector<std::vector<ComplexMatrix>> internal_values;
    std::vector<std::vector<ComplexMatrix>> external_values;
};

inline DelayDeltaAssignment zero_delay_delta(const DelaySystem& dsys) {
    DelayDeltaAssignment d;
    d.base = zero_delta(dsys.base);
    auto fill = [](const std::vector<DelayedEntry>& entries, std::vector<std::vector<ComplexMatrix>>& out) {
        out.resize(entries.size());
        for (std::size_t j = 0; j < entries.size(); ++j) {
            const auto& cp = entries[j].pert;
            if (cp.trivial())
                continue;
            for (const auto& b : cp.blocks) out[j].emplace_back(b.left.cols(), cp.right.rows());
        }
    };
    fill(dsys.internal_entries, d.internal_values);
    fill(dsys.external_entries, d.external_values);
    return d;
}

inline std::vector<Diagnostic> validate(const DelaySystem& dsys) {
    auto out = validate(dsys.base);
    auto err = [&](std::string msg) { out.push_back({Diagnostic::Severity::Error, std::move(msg)}); };
    for (const auto& e : dsys.internal_entries) {
        if (e.fam.rows() != dsys.base.n || e.fam.cols() != dsys.base.n)
            err("internal delayed family is not n x n");
        if (e.fam.q() != dsys.q_ad)
            err("internal delayed family parameter count differs from qAd");
        if (!(e.bound >= 0.0))
            err("internal delay bound must be nonnegative");
    }
    for (const auto& e : dsys.external_entries) {
        if (e.fam.rows() != dsys.base.n || e.fam.cols() != dsys.base.m)
            err("external delayed family is not n x m");
        if (e.fam.q() != dsys.q_bd)
            err("external delayed family parameter count differs from qBd");
        if (!(e.bound >= 0.0))
            err("external delay bound must be nonnegative");
    }
    return out;
}

struct LiftedExponents {
    std::vector<double> rho, phi;     // internal delays
    std::vector<double> rho2, phi2;   // external delays
};

inline double canonical_phase(double x) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(x, two_pi);
    if (r < 0.0)
        r += two_pi;
    if (r == two_pi)
        r = 0.0;
    return r;
}

/// Polar lifting of the delay exponentials at s = sigma + i omega:
/// rho_k = exp(-h_k sigma), phi_k = (h_k omega) mod 2 pi.
inline LiftedExponents lift_at(cplx s, const std::vector<double>& h, const std::vector<double>& h2) {
    LiftedExponents out;
    auto lift = [&](const std::vector<double>& delays, std::vector<double>& rho, std::vector<double>& phi) {
        for (double d : delays) {
            if (d < 0.0)
                throw NegativeDelayError();
            rho.push_back(std::exp(-d * s.real()));
            phi.push_back(canonical_phase(d * s.imag()));
        }
    };
    lift(h, out.rho, out.phi);
    lift(h2, out.rho2, out.phi2);
    return out;
}

struct ConsistencyResult {
    bool consistent = false;
    /// Common decay rate sigma = -ln(rho_j)/h_j.
    double sigma_rate = 0.0;
    /// Common phase rate, smallest nonnegative branch of phi_j/h_j.
    double phase_rate = 0.0;
};

/// Joint inverse-mapping constraints for given delays: all -ln(rho)/h ratios
/// must agree, and the phase ratios must admit a common value modulo the
/// per-delay 2 pi wrap. Vacuously true with no delays.
inline ConsistencyResult consistency_check(const std::vector<double>& rho, const std::vector<double>& phi,
                                           const std::vector<double>& h, const std::vector<double>& rho2,
                                           const std::vector<double>& phi2, const std::vector<double>& h2,
                                           double tol = 1e-9) {
    if (rho.size() != h.size() || phi.size() != h.size() || rho2.size() != h2.size() || phi2.size() != h2.size())
        throw LengthMismatchError("lifted tuples and delay tuples differ in length");

    std::vector<double> all_rho = rho, all_phi = phi, all_h = h;
    all_rho.insert(all_rho.end(), rho2.begin(), rho2.end());
    all_phi.insert(all_phi.end(), phi2.begin(), phi2.end());
    all_h.insert(all_h.end(), h2.begin(), h2.end());

    ConsistencyResult res;
    if (all_h.empty()) {
        res.consistent = true;
        return res;
    }
    for (double d : all_h)
        if (d == 0.0)
            throw ZeroDelayWithConstraintError();

    // Decay rates must agree outright.
    double sigma = -std::log(all_rho[0]) / all_h[0];
    for (std::size_t j = 1; j < all_h.size(); ++j) {
        const double sj = -std::log(all_rho[j]) / all_h[j];
        if (std::abs(sj - sigma) > tol * (1.0 + std::abs(sigma)))
            return res;
    }

    // Phase rates: enumerate the wrap branches of the first delay up to the
    // largest single-branch rate any delay can express.
    const double two_pi = 2.0 * std::numbers::pi;
    const double h_min = *std::min_element(all_h.begin(), all_h.end());
    const double rate_cap = two_pi / h_min + tol;
    for (int k = 0;; ++k) {
        const double candidate = (all_phi[0] + two_pi * k) / all_h[0];
        if (candidate > rate_cap)
            break;
        bool ok = true;
        for (std::size_t j = 0; j < all_h.size() && ok; ++j) {
            const double expected = canonical_phase(all_h[j] * candidate);
            double diff = std::abs(expected - all_phi[j]);
            diff = std::min(diff, two_pi - diff);
            ok = diff <= tol * (1.0 + all_h[j] * std::abs(candidate));
        }
        if (ok) {
            res.consistent = true;
            res.sigma_rate = sigma;
            res.phase_rate = candidate;
            return res;
        }
    }
    return res;
}

namespace detail {

inline ComplexMatrix delayed_sum(const std::vector<DelayedEntry>& entries,
                                 const std::vector<std::vector<ComplexMatrix>>& values,
                                 std::span<const cplx> ztail, std::span<const cplx> weights, std::size_t rows,
                                 std::size_t cols) {
    ComplexMatrix sum(rows, cols);
    for (std::size_t j = 0; j < entries.size(); ++j) {
        if (weights[j] == cplx{})
            continue;
        ComplexMatrix term = entries[j].fam.evaluate(ztail);
        if (!entries[j].pert.trivial() && j < values.size() && !values[j].empty())
            term += assemble_structured(entries[j].pert, ztail, values[j], rows, cols);
        sum += term * weights[j];
    }
    return sum;
}

inline void check_delays(const std::vector<DelayedEntry>& entries, const std::vector<double>& h) {
    if (h.size() != entries.size())
        throw LengthMismatchError("delay tuple length does not match delayed entries");
    for (std::size_t j = 0; j < h.size(); ++j)
        if (h[j] < 0.0 || h[j] > entries[j].bound)
            throw DelayOutOfRangeError();
}

/// Test matrix of the delay system with arbitrary complex weights standing in
/// for the delay exponentials.
inline ComplexMatrix assemble_weighted_pbh(const DelaySystem& dsys, PbhKind kind, cplx s,
                                           const ParameterPoint& point, const DelayDeltaAssignment& delta,
                                           std::span<const cplx> w_int, std::span<const cplx> w_ext,
                                           bool conjugate_frequency_weights) {
    const LpvSystem& sys = dsys.base;
    auto delayed_dynamics = [&](std::span<const cplx> w) {
        ComplexMatrix a = channel_total(sys, Channel::A, point, delta.base);
        a += delayed_sum(dsys.internal_entries, delta.internal_values, point.zAd, w, sys.n, sys.n);
        return a;
    };
    auto delayed_input = [&]() {
        ComplexMatrix b = channel_total(sys, Channel::B, point, delta.base);
        b += delayed_sum(dsys.external_entries, delta.external_values, point.zBd, w_ext, sys.n, sys.m);
        return b;
    };
    switch (kind) {
        case PbhKind::Controllability: {
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * s - delayed_dynamics(w_int);
            return hcat(si, delayed_input());
        }
        case PbhKind::Observability: {
            const cplx w = std::conj(s);
            std::vector<cplx> wi(w_int.begin(), w_int.end());
            if (conjugate_frequency_weights)
                for (auto& v : wi) v = std::conj(v);
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * w - delayed_dynamics(wi);
            return vcat(si, channel_total(sys, Channel::C, point, delta.base));
        }
        case PbhKind::OutputControllability: {
            const ComplexMatrix c_tot = channel_total(sys, Channel::C, point, delta.base);
            const ComplexMatrix d_tot = channel_total(sys, Channel::D, point, delta.base);
            ComplexMatrix si = ComplexMatrix::identity(sys.n) * s - delayed_dynamics(w_int);
            return hcat(c_tot * si, c_tot * delayed_input() + d_tot);
        }
        default:
            throw Error("delay tests support controllability, observability and output controllability");
    }
}

}  // namespace detail

/// Spectral test matrix of the delay system at concrete delay values:
/// every delayed family enters weighted by exp(-h_j s).
inline ComplexMatrix assemble_delay_pbh(const DelaySystem& dsys, PbhKind kind, cplx s, const ParameterPoint& point,
                                        const DelayDeltaAssignment& delta, const std::vector<double>& h,
                                        const std::vector<double>& h2) {
    detail::check_delays(dsys.internal_entries, h);
    detail::check_delays(dsys.external_entries, h2);
    std::vector<cplx> wi, we;
    for (double d : h) wi.push_back(std::exp(cplx{-d, 0.0} * s));
    for (double d : h2) we.push_back(std::exp(cplx{-d, 0.0} * s));
    // conjugate_frequency_weights: the observability stack evaluates its
    // dynamics at conj(s), including the delay exponentials.
    return detail::assemble_weighted_pbh(dsys, kind, s, point, delta, wi, we, true);
}

/// Spectral test matrix with the delay exponentials replaced by free polar
/// coordinates. The phase turns clockwise: the weight is rho * exp(-i phi),
/// so lift_at's output (phi = h omega) reproduces exp(-h s) exactly.
inline ComplexMatrix assemble_lifted_pbh(const DelaySystem& dsys, PbhKind kind, cplx s, const ParameterPoint& point,
                                         const DelayDeltaAssignment& delta, const LiftedExponents& lifted) {
    if (lifted.rho.size() != dsys.eta() || lifted.phi.size() != dsys.eta() || lifted.rho2.size() != dsys.kappa() ||
        lifted.phi2.size() != dsys.kappa())
        throw LengthMismatchError("lifted tuple lengths do not match the delay system");
    std::vector<cplx> wi, we;
    for (std::size_t j = 0; j < dsys.eta(); ++j)
        wi.push_back(std::polar(lifted.rho[j], -lifted.phi[j]));
    for (std::size_t k = 0; k < dsys.kappa(); ++k)
        we.push_back(std::polar(lifted.rho2[k], -lifted.phi2[k]));
    return detail::assemble_weighted_pbh(dsys, kind, s, point, delta, wi, we, false);
}

/// Zero-delay collapse: delayed families merge into the base affine families
/// over the concatenated parameter tuples (zA, zAd) and (zB, zBd); structured
/// perturbations merge through a stacked shared right factor.
inline LpvSystem collapse(const DelaySystem& dsys) {
    const LpvSystem& base = dsys.base;
    LpvSystem out;
    out.n = base.n;
    out.m = base.m;
    out.p = base.p;
    out.famC = base.famC;
    out.famD = base.famD;
    out.pert.channel(Channel::C) = base.pert.channel(Channel::C);
    out.pert.channel(Channel::D) = base.pert.channel(Channel::D);

    auto merge = [&](const AffineMatrixFamily& fam, const std::vector<DelayedEntry>& entries, std::size_t q_d,
                     Channel ch, AffineMatrixFamily& out_fam, ChannelPerturbation& out_pert) {
        const std::size_t rows = fam.rows(), cols = fam.cols();
        std::vector<ComplexMatrix> coeffs(fam.q() + q_d + 1, ComplexMatrix(rows, cols));
        coeffs[0] = fam.coeff(0);
        for (std::size_t i = 1; i <= fam.q(); ++i) coeffs[i] = fam.coeff(i);
        for (const auto& e : entries) {
            coeffs[0] += e.fam.coeff(0);
            for (std::size_t i = 1; i <= q_d; ++i) coeffs[fam.q() + i] += e.fam.coeff(i);
        }
        out_fam = AffineMatrixFamily(std::move(coeffs));

        // Shared right factor: base E stacked over the delayed entries' Es.
        const auto& bcp = dsys.base.pert.channel(ch);
        std::size_t ell_total = bcp.trivial() ? 0 : bcp.right.rows();
        std::vector<std::size_t> offsets;
        for (const auto& e : entries) {
            offsets.push_back(ell_total);
            if (!e.pert.trivial())
                ell_total += e.pert.right.rows();
        }
        if (ell_total == 0)
            return;
        ComplexMatrix e_all(ell_total, cols);
        if (!bcp.trivial())
            e_all.set_block(0, 0, bcp.right);
        for (std::size_t j = 0; j < entries.size(); ++j)
            if (!entries[j].pert.trivial())
                e_all.set_block(offsets[j], 0, entries[j].pert.right);
        out_pert.right = e_all;
        if (!bcp.trivial())
            for (const auto& b : bcp.blocks) out_pert.blocks.push_back(b);
        for (std::size_t j = 0; j < entries.size(); ++j) {
            if (entries[j].pert.trivial())
                continue;
            for (const auto& b : entries[j].pert.blocks) {
                const std::size_t idx = b.index == 0 ? 0 : fam.q() + b.index;
                out_pert.blocks.push_back({idx, b.left});
            }
        }
    };
    merge(base.famA, dsys.internal_entries, dsys.q_ad, Channel::A, out.famA, out.pert.channel(Channel::A));
    merge(base.famB, dsys.external_entries, dsys.q_bd, Channel::B, out.famB, out.pert.channel(Channel::B));
    return out;
}

/// Parameter point of the collapsed system: delay-channel tails appended.
inline ParameterPoint collapse_point(const ParameterPoint& pt) {
    ParameterPoint out = pt;
    out.zA.insert(out.zA.end(), pt.zAd.begin(), pt.zAd.end());
    out.zB.insert(out.zB.end(), pt.zBd.begin(), pt.zBd.end());
    out.zAd.clear();
    out.zBd.clear();
    return out;
}

/// Maps a delay-system assignment onto the collapsed structure (base blocks
/// first, then per-entry blocks, each padded into the widened shared factor).
inline DeltaAssignment collapse_delta(const DelaySystem& dsys, const LpvSystem& collapsed,
                                      const DelayDeltaAssignment& delta) {
    DeltaAssignment out = delta.base;
    auto remap = [&](Channel ch, const std::vector<DelayedEntry>& entries,
                     const std::vector<std::vector<ComplexMatrix>>& values) {
        const auto& merged = collapsed.pert.channel(ch);
        if (merged.trivial())
            return;
        const std::size_t ell_total = merged.right.rows();
        const auto& bcp = dsys.base.pert.channel(ch);
        std::vector<ComplexMatrix> vals;
        std::size_t offset = bcp.trivial() ? 0 : bcp.right.rows();
        if (!bcp.trivial()) {
            const auto& bvals = delta.base.channel(ch);
            for (std::size_t k = 0; k < bcp.blocks.size(); ++k) {
                ComplexMatrix padded(bcp.blocks[k].left.cols(), ell_total);
                if (k < bvals.size())
                    padded.set_block(0, 0, bvals[k]);
                vals.push_back(std::move(padded));
            }
        }
        for (std::size_t j = 0; j < entries.size(); ++j) {
            const auto& cp = entries[j].pert;
            if (cp.trivial())
                continue;
            for (std::size_t k = 0; k < cp.blocks.size(); ++k) {
                ComplexMatrix padded(cp.blocks[k].left.cols(), ell_total);
                if (j < values.size() && k < values[j].size())
                    padded.set_block(0, offset, values[j][k]);
                vals.push_back(std::move(padded));
            }
            offset += cp.right.rows();
        }
        out.channel(ch) = std::move(vals);
    };
    remap(Channel::A, dsys.internal_entries, delta.internal_values);
    remap(Channel::B, dsys.external_entries, delta.external_values);
    return out;
}

}  // namespace lpvcert
