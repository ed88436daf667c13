#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lpvcert/complex_matrix.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/linalg.hpp"

namespace lpvcert {

enum class Channel { A = 0, B = 1, C = 2, D = 3 };

inline constexpr std::array<Channel, 4> kChannels{Channel::A, Channel::B, Channel::C, Channel::D};

inline const char* channel_name(Channel ch) {
    switch (ch) {
        case Channel::A: return "A";
        case Channel::B: return "B";
        case Channel::C: return "C";
        case Channel::D: return "D";
    }
    return "?";
}

/// Affine family M(z) = M_0 + sum_{i=1..q} z_i * M_i. The leading weight
/// z_0 = 1 is implicit and never stored.
class AffineMatrixFamily {
public:
    AffineMatrixFamily() = default;

    explicit AffineMatrixFamily(std::vector<ComplexMatrix> coeffs) : coeffs_(std::move(coeffs)) {
        if (coeffs_.empty())
            throw ShapeMismatchError("affine family needs at least the constant coefficient");
        for (const auto& c : coeffs_)
            if (c.rows() != coeffs_[0].rows() || c.cols() != coeffs_[0].cols())
                throw ShapeMismatchError("affine family coefficients differ in shape");
    }

    static AffineMatrixFamily constant(ComplexMatrix m) { return AffineMatrixFamily({std::move(m)}); }

    std::size_t q() const { return coeffs_.size() - 1; }
    std::size_t rows() const { return coeffs_.at(0).rows(); }
    std::size_t cols() const { return coeffs_.at(0).cols(); }
    const std::vector<ComplexMatrix>& coeffs() const { return coeffs_; }
    const ComplexMatrix& coeff(std::size_t i) const { return coeffs_.at(i); }

    ComplexMatrix evaluate(std::span<const cplx> ztail) const {
        if (ztail.size() != q())
            throw LengthMismatchError("parameter tail length does not match family");
        ComplexMatrix sum = coeffs_[0];
        for (std::size_t i = 0; i < ztail.size(); ++i) {
            if (ztail[i] == cplx{})
                continue;
            sum += coeffs_[i + 1] * ztail[i];
        }
        return sum;
    }

private:
    std::vector<ComplexMatrix> coeffs_;
};

inline ComplexMatrix evaluate_family(const AffineMatrixFamily& fam, std::span<const cplx> ztail) {
    return fam.evaluate(ztail);
}

/// Parameter values for the varying coordinates. Per channel the tuple holds
/// z_1..z_q only; delay channels (Ad, Bd) are used by delay systems.
struct ParameterPoint {
    std::vector<cplx> zA, zB, zC, zD;
    std::vector<cplx> zAd, zBd;

    std::span<const cplx> tail(Channel ch) const {
        switch (ch) {
            case Channel::A: return zA;
            case Channel::B: return zB;
            case Channel::C: return zC;
            case Channel::D: return zD;
        }
        return {};
    }

    ParameterPoint conjugated() const {
        ParameterPoint p = *this;
        for (auto* v : {&p.zA, &p.zB, &p.zC, &p.zD, &p.zAd, &p.zBd})
            for (auto& z : *v) z = std::conj(z);
        return p;
    }
};

/// One structured uncertainty block: left scaling factor D attached to
/// parameter index i (0 means the constant slot with implicit weight 1).
struct PerturbationBlock {
    std::size_t index = 0;  // i in 0..q_X
    ComplexMatrix left;     // rows = channel rows, cols = block width
};

/// Structured perturbation of one channel: sum_i z_i sum_j D_ij Delta_ij E
/// with the right factor E shared by every block of the channel.
struct ChannelPerturbation {
    std::vector<PerturbationBlock> blocks;
    ComplexMatrix right;  // E: shared, rows = ell, cols = channel cols

    bool trivial() const { return blocks.empty() || right.empty(); }
};

struct PerturbationStructure {
    std::array<ChannelPerturbation, 4> channels;

    ChannelPerturbation& channel(Channel ch) { return channels[static_cast<std::size_t>(ch)]; }
    const ChannelPerturbation& channel(Channel ch) const { return channels[static_cast<std::size_t>(ch)]; }
};

/// Concrete values for the free uncertainty blocks, aligned with the owning
/// structure's block lists.
struct DeltaAssignment {
    std::array<std::vector<ComplexMatrix>, 4> channels;

    std::vector<ComplexMatrix>& channel(Channel ch) { return channels[static_cast<std::size_t>(ch)]; }
    const std::vector<ComplexMatrix>& channel(Channel ch) const { return channels[static_cast<std::size_t>(ch)]; }

    bool empty() const {
        for (const auto& c : channels)
            if (!c.empty())
                return false;
        return true;
    }
};

struct LpvSystem {
    std::size_t n = 0, m = 0, p = 0;
    AffineMatrixFamily famA, famB, famC, famD;
    PerturbationStructure pert;

    std::size_t qA() const { return famA.q(); }
    std::size_t qB() const { return famB.q(); }
    std::size_t qC() const { return famC.q(); }
    std::size_t qD() const { return famD.q(); }

    const AffineMatrixFamily& family(Channel ch) const {
        switch (ch) {
            case Channel::A: return famA;
            case Channel::B: return famB;
            case Channel::C: return famC;
            case Channel::D: return famD;
        }
        return famA;
    }

    std::size_t channel_rows(Channel ch) const { return (ch == Channel::A || ch == Channel::B) ? n : p; }
    std::size_t channel_cols(Channel ch) const { return (ch == Channel::A || ch == Channel::C) ? n : m; }
};

/// Zero-filled assignment matching the structure of sys.
inline DeltaAssignment zero_delta(const LpvSystem& sys) {
    DeltaAssignment d;
    for (Channel ch : kChannels) {
        const auto& cp = sys.pert.channel(ch);
        if (cp.trivial())
            continue;
        auto& vals = d.channel(ch);
        vals.reserve(cp.blocks.size());
        for (const auto& b : cp.blocks) vals.emplace_back(b.left.cols(), cp.right.rows());
    }
    return d;
}

namespace detail {
inline cplx weight_at(std::span<const cplx> ztail, std::size_t index) {
    if (index == 0)
        return cplx{1.0, 0.0};
    if (index - 1 >= ztail.size())
        throw LengthMismatchError("perturbation block index exceeds parameter tail");
    return ztail[index - 1];
}
}  // namespace detail

/// Assembled structured perturbation sum_i z_i sum_j D_ij Delta_ij E for one
/// channel-like structure.
inline ComplexMatrix assemble_structured(const ChannelPerturbation& cp, std::span<const cplx> ztail,
                                         const std::vector<ComplexMatrix>& vals, std::size_t rows,
                                         std::size_t cols) {
    ComplexMatrix total(rows, cols);
    if (cp.trivial())
        return total;
    if (vals.size() != cp.blocks.size())
        throw ShapeMismatchError("delta assignment does not match structure blocks");
    for (std::size_t k = 0; k < cp.blocks.size(); ++k) {
        const auto& blk = cp.blocks[k];
        const auto& dv = vals[k];
        if (dv.rows() != blk.left.cols() || dv.cols() != cp.right.rows())
            throw ShapeMismatchError("delta block shape does not compose with D and E");
        const cplx w = detail::weight_at(ztail, blk.index);
        if (w == cplx{} || dv.is_zero())
            continue;
        total += w * (blk.left * dv * cp.right);
    }
    if (total.rows() != rows || total.cols() != cols)
        throw ShapeMismatchError("assembled perturbation has wrong shape");
    return total;
}

/// Assembled channel perturbation of a system at a point.
inline ComplexMatrix assemble_perturbation(const LpvSystem& sys, Channel ch, const ParameterPoint& point,
                                           const DeltaAssignment& delta) {
    return assemble_structured(sys.pert.channel(ch), point.tail(ch), delta.channel(ch), sys.channel_rows(ch),
                               sys.channel_cols(ch));
}

/// Evaluated nominal + perturbation for one channel.
inline ComplexMatrix channel_total(const LpvSystem& sys, Channel ch, const ParameterPoint& point,
                                   const DeltaAssignment& delta) {
    ComplexMatrix t = sys.family(ch).evaluate(point.tail(ch));
    if (!sys.pert.channel(ch).trivial() && !delta.channel(ch).empty())
        t += assemble_perturbation(sys, ch, point, delta);
    return t;
}

namespace detail {

/// Stack over i = 0..q of the per-index sums sum_j D_ij Delta_ij E, i.e. the
/// channel column of the stacked uncertainty block. Rows = (q+1)*rows(ch).
inline ComplexMatrix stacked_channel(const LpvSystem& sys, Channel ch, const DeltaAssignment& delta, bool adjoint) {
    const std::size_t q = sys.family(ch).q();
    const std::size_t rows = sys.channel_rows(ch);
    const std::size_t cols = sys.channel_cols(ch);
    const std::size_t cell_rows = adjoint ? cols : rows;
    const std::size_t cell_cols = adjoint ? rows : cols;
    ComplexMatrix stack((q + 1) * cell_rows, cell_cols);
    const auto& cp = sys.pert.channel(ch);
    if (cp.trivial())
        return stack;
    const auto& vals = delta.channel(ch);
    if (vals.size() != cp.blocks.size())
        throw ShapeMismatchError("delta assignment does not match structure blocks");
    for (std::size_t k = 0; k < cp.blocks.size(); ++k) {
        const auto& blk = cp.blocks[k];
        if (blk.index > q)
            throw ShapeMismatchError("block index exceeds channel parameter count");
        ComplexMatrix term = blk.left * vals[k] * cp.right;
        if (adjoint)
            term = term.adjoint();
        ComplexMatrix cell = stack.block(blk.index * cell_rows, 0, cell_rows, cell_cols);
        cell += term;
        stack.set_block(blk.index * cell_rows, 0, cell);
    }
    return stack;
}

inline ComplexMatrix block_diag(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix r(a.rows() + b.rows(), a.cols() + b.cols());
    r.set_block(0, 0, a);
    r.set_block(a.rows(), a.cols(), b);
    return r;
}

}  // namespace detail

/// Stacked uncertainty block for the (A, B) channel pair: the block-diagonal
/// matrix such that (-A_pert(z) : B_pert(z)) equals
/// (-zA (x) I_n : zB (x) I_n) * stacked_delta, with the implicit leading 1 in
/// each tuple.
inline ComplexMatrix stacked_delta(const LpvSystem& sys, const DeltaAssignment& delta) {
    return detail::block_diag(detail::stacked_channel(sys, Channel::A, delta, false),
                              detail::stacked_channel(sys, Channel::B, delta, false));
}

/// Dual stack for the (A, C) pair, used by observability admissibility: the
/// block-diagonal matrix carrying the adjoints of the channel perturbations,
/// so that (-A_pert(z)^* : C_pert(z)^*) = (-conj(zA) (x) I : conj(zC) (x) I) * stack.
inline ComplexMatrix stacked_delta_observability(const LpvSystem& sys, const DeltaAssignment& delta) {
    return detail::block_diag(detail::stacked_channel(sys, Channel::A, delta, true),
                              detail::stacked_channel(sys, Channel::C, delta, true));
}

/// Row block (w_0 I : w_1 I : ... : w_q I) with w_0 = 1, scaled by sign.
inline ComplexMatrix tuple_row_block(std::span<const cplx> ztail, std::size_t ident, double sign) {
    ComplexMatrix r(ident, (ztail.size() + 1) * ident);
    for (std::size_t i = 0; i <= ztail.size(); ++i) {
        const cplx w = (i == 0 ? cplx{1.0, 0.0} : ztail[i - 1]) * sign;
        for (std::size_t d = 0; d < ident; ++d) r(d, i * ident + d) = w;
    }
    return r;
}

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Error;
    std::string message;
};

/// Structural diagnostics. Shape inconsistencies are errors; a violated
/// dimension ordering p <= m <= n is only a warning.
inline std::vector<Diagnostic> validate(const LpvSystem& sys) {
    std::vector<Diagnostic> out;
    auto err = [&](std::string msg) { out.push_back({Diagnostic::Severity::Error, std::move(msg)}); };
    auto warn = [&](std::string msg) { out.push_back({Diagnostic::Severity::Warning, std::move(msg)}); };

    if (sys.n < 1 || sys.m < 1 || sys.p < 1)
        err("dimensions n, m, p must all be at least 1");
    struct Expect {
        Channel ch;
        const AffineMatrixFamily* fam;
        std::size_t rows, cols;
    };
    const Expect shapes[] = {{Channel::A, &sys.famA, sys.n, sys.n},
                             {Channel::B, &sys.famB, sys.n, sys.m},
                             {Channel::C, &sys.famC, sys.p, sys.n},
                             {Channel::D, &sys.famD, sys.p, sys.m}};
    for (const auto& e : shapes) {
        if (e.fam->coeffs().empty()) {
            err(std::string("family ") + channel_name(e.ch) + " has no coefficients");
            continue;
        }
        if (e.fam->rows() != e.rows || e.fam->cols() != e.cols)
            err(std::string("family ") + channel_name(e.ch) + " coefficients have wrong shape");
        const auto& cp = sys.pert.channel(e.ch);
        if (cp.trivial())
            continue;
        if (cp.right.cols() != e.cols)
            err(std::string("perturbation E of channel ") + channel_name(e.ch) + " has wrong column count");
        for (const auto& b : cp.blocks) {
            if (b.left.rows() != e.rows)
                err(std::string("perturbation block of channel ") + channel_name(e.ch) + " has wrong row count");
            if (b.index > e.fam->q())
                err(std::string("perturbation block index exceeds q of channel ") + channel_name(e.ch));
        }
    }
    if (!(sys.p <= sys.m && sys.m <= sys.n))
        warn("dimension ordering p <= m <= n is assumed by the analysis theory");
    return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Diagnostic::Severity::Error)
            return true;
    return false;
}

struct RecenterResult {
    LpvSystem system;
    /// Assignment that reproduces the absorbed affine drift; combine with a
    /// padded original assignment to recover any perturbed evaluation.
    DeltaAssignment drift;
};

namespace detail {

inline void recenter_channel(const LpvSystem& sys, Channel ch, std::span<const cplx> z0tail,
                             ChannelPerturbation& out_pert, std::vector<ComplexMatrix>& out_drift,
                             AffineMatrixFamily& out_fam) {
    const auto& fam = sys.family(ch);
    const std::size_t nc = sys.channel_cols(ch);
    const auto& old_cp = sys.pert.channel(ch);
    const std::size_t ell_old = old_cp.trivial() ? 0 : old_cp.right.rows();

    // Extended shared right factor [E_old; I].
    ComplexMatrix e_new(ell_old + nc, nc);
    if (ell_old > 0)
        e_new.set_block(0, 0, old_cp.right);
    e_new.set_block(ell_old, 0, ComplexMatrix::identity(nc));
    out_pert.right = e_new;

    if (!old_cp.trivial())
        out_pert.blocks = old_cp.blocks;
    out_drift.assign(out_pert.blocks.size(), ComplexMatrix());
    for (std::size_t k = 0; k < out_pert.blocks.size(); ++k)
        out_drift[k] = ComplexMatrix(out_pert.blocks[k].left.cols(), ell_old + nc);

    // One drift column per varying coefficient, entered at the coefficient's
    // own slot and at the constant slot to subtract the z0 value.
    for (std::size_t i0 = 1; i0 <= fam.q(); ++i0) {
        const ComplexMatrix& coeff = fam.coeff(i0);
        ComplexMatrix unit(nc, ell_old + nc);
        unit.set_block(0, ell_old, ComplexMatrix::identity(nc));

        out_pert.blocks.push_back({i0, coeff});
        out_drift.push_back(unit);

        out_pert.blocks.push_back({0, coeff});
        out_drift.push_back(unit * (-z0tail[i0 - 1]));
    }

    std::vector<ComplexMatrix> coeffs(fam.q() + 1, ComplexMatrix(fam.rows(), fam.cols()));
    coeffs[0] = fam.evaluate(z0tail);
    out_fam = AffineMatrixFamily(std::move(coeffs));
}

}  // namespace detail

/// Freezes the nominal families at z0 and absorbs the affine variation
/// M(z) - M(z0) into additional structured uncertainty blocks.
inline RecenterResult recenter(const LpvSystem& sys, const ParameterPoint& z0) {
    if (z0.zA.size() != sys.qA() || z0.zB.size() != sys.qB() || z0.zC.size() != sys.qC() || z0.zD.size() != sys.qD())
        throw LengthMismatchError("recenter point does not match system parameter counts");
    RecenterResult r;
    r.system.n = sys.n;
    r.system.m = sys.m;
    r.system.p = sys.p;
    detail::recenter_channel(sys, Channel::A, z0.zA, r.system.pert.channel(Channel::A),
                             r.drift.channel(Channel::A), r.system.famA);
    detail::recenter_channel(sys, Channel::B, z0.zB, r.system.pert.channel(Channel::B),
                             r.drift.channel(Channel::B), r.system.famB);
    detail::recenter_channel(sys, Channel::C, z0.zC, r.system.pert.channel(Channel::C),
                             r.drift.channel(Channel::C), r.system.famC);
    detail::recenter_channel(sys, Channel::D, z0.zD, r.system.pert.channel(Channel::D),
                             r.drift.channel(Channel::D), r.system.famD);
    return r;
}

/// Maps an assignment for the original structure onto the recentered one
/// (zero columns for the widened shared factor, zero drift blocks), so it can
/// be added entrywise to RecenterResult::drift.
inline DeltaAssignment pad_delta_for_recentered(const LpvSystem& original, const LpvSystem& recentered,
                                                const DeltaAssignment& delta) {
    DeltaAssignment out;
    for (Channel ch : kChannels) {
        const auto& old_cp = original.pert.channel(ch);
        const auto& new_cp = recentered.pert.channel(ch);
        auto& vals = out.channel(ch);
        vals.reserve(new_cp.blocks.size());
        const auto& old_vals = delta.channel(ch);
        const std::size_t ell_new = new_cp.right.rows();
        for (std::size_t k = 0; k < new_cp.blocks.size(); ++k) {
            ComplexMatrix padded(new_cp.blocks[k].left.cols(), ell_new);
            if (k < old_cp.blocks.size() && k < old_vals.size())
                padded.set_block(0, 0, old_vals[k]);
            vals.push_back(std::move(padded));
        }
    }
    return out;
}

inline DeltaAssignment add_delta(const DeltaAssignment& a, const DeltaAssignment& b) {
    DeltaAssignment out = a;
    for (std::size_t c = 0; c < 4; ++c) {
        auto& av = out.channels[c];
        const auto& bv = b.channels[c];
        if (av.size() != bv.size())
            throw ShapeMismatchError("delta assignments have different block counts");
        for (std::size_t k = 0; k < av.size(); ++k) av[k] += bv[k];
    }
    return out;
}

/// Bounded axis-aligned box in the parameter space, one complex interval per
/// stored coordinate. Real-only coordinates carry degenerate [0, 0] imaginary
/// intervals.
struct BoxDomain {
    struct ComplexInterval {
        double re_lo = 0.0, re_hi = 0.0;
        double im_lo = 0.0, im_hi = 0.0;

        bool valid() const {
            return re_lo <= re_hi && im_lo <= im_hi && std::isfinite(re_lo) && std::isfinite(re_hi) &&
                   std::isfinite(im_lo) && std::isfinite(im_hi);
        }
        bool re_degenerate() const { return re_lo == re_hi; }
        bool im_degenerate() const { return im_lo == im_hi; }
        double max_sq_mod() const {
            const double re = std::max(std::abs(re_lo), std::abs(re_hi));
            const double im = std::max(std::abs(im_lo), std::abs(im_hi));
            return re * re + im * im;
        }
    };

    std::vector<ComplexInterval> zA, zB, zC, zD;
    std::vector<ComplexInterval> zAd, zBd;

    std::vector<ComplexInterval>& segment(Channel ch) {
        switch (ch) {
            case Channel::A: return zA;
            case Channel::B: return zB;
            case Channel::C: return zC;
            case Channel::D: return zD;
        }
        return zA;
    }
    const std::vector<ComplexInterval>& segment(Channel ch) const {
        return const_cast<BoxDomain*>(this)->segment(ch);
    }

    bool valid() const {
        for (const auto* seg : {&zA, &zB, &zC, &zD, &zAd, &zBd})
            for (const auto& iv : *seg)
                if (!iv.valid())
                    return false;
        return true;
    }

    static ComplexInterval point_interval(cplx z) { return {z.real(), z.real(), z.imag(), z.imag()}; }
    static ComplexInterval real_interval(double lo, double hi) { return {lo, hi, 0.0, 0.0}; }

    /// Singleton domain pinned at a parameter point.
    static BoxDomain singleton(const ParameterPoint& pt) {
        BoxDomain d;
        for (const auto& z : pt.zA) d.zA.push_back(point_interval(z));
        for (const auto& z : pt.zB) d.zB.push_back(point_interval(z));
        for (const auto& z : pt.zC) d.zC.push_back(point_interval(z));
        for (const auto& z : pt.zD) d.zD.push_back(point_interval(z));
        for (const auto& z : pt.zAd) d.zAd.push_back(point_interval(z));
        for (const auto& z : pt.zBd) d.zBd.push_back(point_interval(z));
        return d;
    }

    /// Mirror image under complex conjugation of every coordinate.
    BoxDomain conjugated() const {
        BoxDomain d = *this;
        for (auto* seg : {&d.zA, &d.zB, &d.zC, &d.zD, &d.zAd, &d.zBd})
            for (auto& iv : *seg) {
                const double lo = -iv.im_hi, hi = -iv.im_lo;
                iv.im_lo = lo;
                iv.im_hi = hi;
            }
        return d;
    }
};

/// Exact supremum of 1 + sum |z_i|^2 over the box segment (the implicit
/// leading 1 included), attained at a corner.
inline double sup_tuple_norm_sq(const std::vector<BoxDomain::ComplexInterval>& seg) {
    double s = 1.0;
    for (const auto& iv : seg) s += iv.max_sq_mod();
    return s;
}

}  // namespace lpvcert
