#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lpvcert/errors.hpp"
#include "lpvcert/parallel.hpp"

namespace lpvcert {

/// Bounded axis-aligned box of real coordinates.
struct CoverBox {
    std::vector<double> lo, hi;

    std::size_t dim() const { return lo.size(); }

    void push(double l, double h) {
        lo.push_back(l);
        hi.push_back(h);
    }

    bool valid() const {
        if (lo.size() != hi.size() || lo.empty())
            return false;
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                return false;
        return true;
    }
};

using CoverFn = std::function<double(std::span<const double>)>;

enum class CoverOutcome { Certified, Witness, Inconclusive };

inline const char* cover_outcome_name(CoverOutcome o) {
    switch (o) {
        case CoverOutcome::Certified: return "certified";
        case CoverOutcome::Witness: return "witness";
        case CoverOutcome::Inconclusive: return "inconclusive";
    }
    return "?";
}

/// Per-cell audit record: the certified-cell inequality
/// value - sum(width_i * bound_i) >= floor is re-checkable from it.
struct CellRecord {
    std::vector<double> anchor;
    std::vector<double> widths;
    std::vector<double> bounds;
    double value = 0.0;
    double decrement = 0.0;
    int depth = 0;
    bool certified = false;
};

struct CoverCertificate {
    std::size_t cells_examined = 0;
    int max_depth = 0;
    double floor_value = 0.0;
    double min_cell_value = std::numeric_limits<double>::infinity();
    double max_cell_width = 0.0;
    double max_derivative_bound = 0.0;
};

struct CoverResult {
    CoverOutcome outcome = CoverOutcome::Inconclusive;
    CoverCertificate certificate;
    std::vector<double> witness_point;
    double witness_value = 0.0;
};

struct CoverOptions {
    /// Use the single uniform bound dim * max_width * max_bound instead of the
    /// per-coordinate sum.
    bool uniform_rule = false;
    unsigned jobs = 1;
    std::size_t derivative_samples = 5;
    double safety_factor = 2.0;
    std::function<void(const CellRecord&)> cell_log;
};

/// Sampled estimate of max |df/dx_coord| over the box: central finite
/// differences along the coordinate through the box center, times a safety
/// factor.
inline double derivative_bound(const CoverFn& f, const CoverBox& box, std::size_t coord,
                               const CoverOptions& opts = {}) {
    if (!box.valid())
        throw EmptyBoxError();
    if (coord >= box.dim())
        throw Error("derivative_bound: coordinate out of range");
    const double width = box.hi[coord] - box.lo[coord];
    if (width == 0.0)
        return 0.0;

    std::vector<double> x(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) x[i] = 0.5 * (box.lo[i] + box.hi[i]);

    const std::size_t samples = std::max<std::size_t>(opts.derivative_samples, 3);
    std::vector<double> values(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        x[coord] = box.lo[coord] + width * static_cast<double>(k) / static_cast<double>(samples - 1);
        values[k] = f(x);
    }
    const double step = width / static_cast<double>(samples - 1);
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < samples; ++k)
        worst = std::max(worst, std::abs(values[k + 1] - values[k - 1]) / (2.0 * step));
    // Endpoints via one-sided differences.
    worst = std::max(worst, std::abs(values[1] - values[0]) / step);
    worst = std::max(worst, std::abs(values[samples - 1] - values[samples - 2]) / step);
    return opts.safety_factor * worst;
}

namespace detail {

struct CoverCell {
    CoverBox box;
    int depth = 0;
};

struct CellOutcome {
    bool certified = false;
    bool witness = false;
    std::vector<double> witness_point;
    double witness_value = 0.0;
    double anchor_value = 0.0;
    std::size_t split_coord = 0;
    CellRecord record;
};

inline CellOutcome process_cell(const CoverFn& f, const CoverCell& cell, double floor_value,
                                const CoverOptions& opts) {
    const CoverBox& b = cell.box;
    const std::size_t d = b.dim();
    CellOutcome out;

    std::vector<double> anchor = b.lo;
    std::vector<double> center(d), corner = b.hi;
    for (std::size_t i = 0; i < d; ++i) center[i] = 0.5 * (b.lo[i] + b.hi[i]);

    const double v_anchor = f(anchor);
    const double v_center = f(center);
    const double v_corner = f(corner);
    out.anchor_value = v_anchor;

    auto witness_at = [&](const std::vector<double>& x, double v) {
        out.witness = true;
        out.witness_point = x;
        out.witness_value = v;
    };
    if (v_anchor <= floor_value)
        witness_at(anchor, v_anchor);
    else if (v_center <= floor_value)
        witness_at(center, v_center);
    else if (v_corner <= floor_value)
        witness_at(corner, v_corner);
    if (out.witness)
        return out;

    std::vector<double> widths(d), bounds(d, 0.0);
    double decrement = 0.0, max_w = 0.0, max_m = 0.0;
    std::size_t active = 0, worst_coord = 0;
    double worst_impact = -1.0;
    for (std::size_t i = 0; i < d; ++i) {
        widths[i] = b.hi[i] - b.lo[i];
        if (widths[i] == 0.0)
            continue;
        ++active;
        bounds[i] = derivative_bound(f, b, i, opts);
        max_w = std::max(max_w, widths[i]);
        max_m = std::max(max_m, bounds[i]);
        const double impact = widths[i] * bounds[i];
        decrement += impact;
        if (impact > worst_impact) {
            worst_impact = impact;
            worst_coord = i;
        }
    }
    if (opts.uniform_rule)
        decrement = static_cast<double>(active) * max_w * max_m;

    out.record.anchor = anchor;
    out.record.widths = widths;
    out.record.bounds = bounds;
    out.record.value = v_anchor;
    out.record.decrement = decrement;
    out.record.depth = cell.depth;

    if (v_anchor - decrement >= floor_value) {
        out.certified = true;
        out.record.certified = true;
        return out;
    }
    // Expanding from the center reaches at most half a width per coordinate,
    // so the same first-order argument applies with halved decrement.
    if (v_center - 0.5 * decrement >= floor_value) {
        out.certified = true;
        out.record.certified = true;
        out.record.anchor = center;
        out.record.value = v_center;
        for (auto& w : out.record.widths) w *= 0.5;
        out.record.decrement = 0.5 * decrement;
        return out;
    }
    if (active == 0) {
        // Point box that cleared the floor strictly.
        out.certified = v_anchor > floor_value;
        out.record.certified = out.certified;
        if (!out.certified)
            witness_at(anchor, v_anchor);
        return out;
    }
    out.split_coord = worst_coord;
    return out;
}

}  // namespace detail

/// Certifies f >= floor over the box by an adaptive cover: a cell is accepted
/// when its anchor value minus the first-order decrement (cell widths times
/// sampled derivative bounds) still clears the floor; otherwise the cell is
/// bisected along its worst width*bound coordinate. Any sampled point at or
/// below the floor is returned as a witness. The budget caps processed cells.
inline CoverResult certify_positive(const CoverFn& f, const CoverBox& box, double floor_value, std::size_t budget,
                                    const CoverOptions& opts = {}) {
    if (!box.valid())
        throw EmptyBoxError();
    if (!(floor_value > 0.0))
        throw Error("certify_positive: floor must be positive");

    CoverResult result;
    result.certificate.floor_value = floor_value;

    std::deque<detail::CoverCell> queue;
    queue.push_back({box, 0});

    while (!queue.empty()) {
        const std::size_t remaining = budget > result.certificate.cells_examined
                                          ? budget - result.certificate.cells_examined
                                          : 0;
        if (remaining == 0) {
            result.outcome = CoverOutcome::Inconclusive;
            return result;
        }
        const std::size_t wave = std::min(queue.size(), remaining);
        std::vector<detail::CoverCell> cells(queue.begin(), queue.begin() + static_cast<long>(wave));
        queue.erase(queue.begin(), queue.begin() + static_cast<long>(wave));

        std::vector<detail::CellOutcome> outcomes(cells.size());
        parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
            outcomes[i] = detail::process_cell(f, cells[i], floor_value, opts);
        });

        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto& oc = outcomes[i];
            auto& cert = result.certificate;
            ++cert.cells_examined;
            cert.max_depth = std::max(cert.max_depth, cells[i].depth);
            cert.min_cell_value = std::min(cert.min_cell_value, oc.anchor_value);
            if (oc.witness) {
                // Re-evaluate before reporting: the witness must stand on its own.
                const double v = f(oc.witness_point);
                result.outcome = CoverOutcome::Witness;
                result.witness_point = oc.witness_point;
                result.witness_value = v;
                return result;
            }
            for (std::size_t c = 0; c < oc.record.widths.size(); ++c) {
                cert.max_cell_width = std::max(cert.max_cell_width, oc.record.widths[c]);
                cert.max_derivative_bound = std::max(cert.max_derivative_bound, oc.record.bounds[c]);
            }
            if (opts.cell_log)
                opts.cell_log(oc.record);
            if (oc.certified)
                continue;
            detail::CoverCell left{cells[i].box, cells[i].depth + 1};
            detail::CoverCell right = left;
            const std::size_t sc = oc.split_coord;
            const double mid = 0.5 * (cells[i].box.lo[sc] + cells[i].box.hi[sc]);
            left.box.hi[sc] = mid;
            right.box.lo[sc] = mid;
            queue.push_back(std::move(left));
            queue.push_back(std::move(right));
        }
    }
    result.outcome = CoverOutcome::Certified;
    return result;
}

}  // namespace lpvcert
