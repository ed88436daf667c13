#pragma once

#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpvcert/delay.hpp"
#include "lpvcert/delay_analysis.hpp"
#include "lpvcert/errors.hpp"
#include "lpvcert/pbh.hpp"
#include "lpvcert/robustness.hpp"
#include "lpvcert/system_model.hpp"

namespace lpvcert {

using json = nlohmann::ordered_json;

inline constexpr int kSystemFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

/// Everything a system file can describe: the model, an optional delay
/// extension, and an optional default domain.
struct ModelFile {
    LpvSystem system;
    std::optional<DelaySystem> delays;
    std::optional<BoxDomain> domain;

    bool has_delays() const { return delays.has_value(); }
    DelaySystem as_delay_system() const {
        if (delays)
            return *delays;
        DelaySystem d;
        d.base = system;
        return d;
    }
};

namespace io_detail {

inline const json& require(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ValidationError(where + ": missing field '" + key + "'");
    return *it;
}

inline cplx parse_complex(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(where + ": complex entries are [re, im] number pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline json dump_complex(cplx z) { return json::array({z.real(), z.imag()}); }

inline ComplexMatrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": matrix must be a non-empty array of rows");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty())
        throw ValidationError(where + ": matrix rows must be non-empty arrays");
    const std::size_t cols = j[0].size();
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ValidationError(where + ": ragged matrix rows");
        for (std::size_t k = 0; k < cols; ++k)
            m(i, k) = parse_complex(j[i][k], where + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
    return m;
}

inline json dump_matrix(const ComplexMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(dump_complex(m(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline AffineMatrixFamily parse_family(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": affine family needs at least the constant coefficient");
    std::vector<ComplexMatrix> coeffs;
    for (std::size_t i = 0; i < j.size(); ++i)
        coeffs.push_back(parse_matrix(j[i], where + "[" + std::to_string(i) + "]"));
    return AffineMatrixFamily(std::move(coeffs));
}

inline json dump_family(const AffineMatrixFamily& fam) {
    json out = json::array();
    for (const auto& c : fam.coeffs()) out.push_back(dump_matrix(c));
    return out;
}

inline ChannelPerturbation parse_channel_perturbation(const json& j, const std::string& where) {
    ChannelPerturbation cp;
    cp.right = parse_matrix(require(j, "E", where), where + ".E");
    const json& blocks = require(j, "blocks", where);
    if (!blocks.is_array())
        throw ValidationError(where + ".blocks: must be an array");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string bw = where + ".blocks[" + std::to_string(b) + "]";
        const json& blk = blocks[b];
        const json& idx = require(blk, "i", bw);
        if (!idx.is_number_unsigned())
            throw ValidationError(bw + ".i: must be a nonnegative integer");
        cp.blocks.push_back({idx.get<std::size_t>(), parse_matrix(require(blk, "D", bw), bw + ".D")});
    }
    return cp;
}

inline json dump_channel_perturbation(const ChannelPerturbation& cp) {
    json out;
    out["E"] = dump_matrix(cp.right);
    json blocks = json::array();
    for (const auto& b : cp.blocks) {
        json blk;
        blk["i"] = b.index;
        blk["D"] = dump_matrix(b.left);
        blocks.push_back(std::move(blk));
    }
    out["blocks"] = std::move(blocks);
    return out;
}

inline std::vector<BoxDomain::ComplexInterval> parse_domain_segment(const json& j, const std::string& where) {
    if (!j.is_array())
        throw ValidationError(where + ": domain segment must be an array of intervals");
    std::vector<BoxDomain::ComplexInterval> seg;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string kw = where + "[" + std::to_string(k) + "]";
        const json& iv = j[k];
        auto bound = [&](const json& b, const std::string& pw) -> double {
            if (b.is_number())
                return b.get<double>();
            // "inf" / "-inf" request an unbounded domain explicitly.
            if (b.is_string()) {
                const std::string s = b.get<std::string>();
                if (s == "inf" || s == "+inf")
                    return std::numeric_limits<double>::infinity();
                if (s == "-inf")
                    return -std::numeric_limits<double>::infinity();
            }
            throw ValidationError(pw + ": interval bounds are numbers (or 'inf'/'-inf')");
        };
        auto pair = [&](const json& p, const std::string& pw) -> std::pair<double, double> {
            if (!p.is_array() || p.size() != 2)
                throw ValidationError(pw + ": interval is a [lo, hi] pair");
            return {bound(p[0], pw), bound(p[1], pw)};
        };
        BoxDomain::ComplexInterval out;
        const auto re = pair(require(iv, "re", kw), kw + ".re");
        out.re_lo = re.first;
        out.re_hi = re.second;
        if (iv.contains("im")) {
            const auto im = pair(iv["im"], kw + ".im");
            out.im_lo = im.first;
            out.im_hi = im.second;
        }
        if (!(std::isfinite(out.re_lo) && std::isfinite(out.re_hi) && std::isfinite(out.im_lo) &&
              std::isfinite(out.im_hi)))
            throw ValidationError(kw +
                                  ": unbounded parameter domains are not analyzable: once the domain is "
                                  "unbounded, structured perturbation families with full-rank scaling factors "
                                  "always contain controllability-destroying members; supply a bounded box");
        if (!out.valid())
            throw ValidationError(kw + ": interval bounds must satisfy lo <= hi");
        seg.push_back(out);
    }
    return seg;
}

inline json dump_domain_segment(const std::vector<BoxDomain::ComplexInterval>& seg) {
    json out = json::array();
    for (const auto& iv : seg) {
        json j;
        j["re"] = json::array({iv.re_lo, iv.re_hi});
        j["im"] = json::array({iv.im_lo, iv.im_hi});
        out.push_back(std::move(j));
    }
    return out;
}

inline BoxDomain parse_domain(const json& j, const std::string& where) {
    BoxDomain d;
    struct Entry {
        const char* key;
        std::vector<BoxDomain::ComplexInterval>* seg;
    };
    Entry entries[] = {{"zA", &d.zA}, {"zB", &d.zB}, {"zC", &d.zC},
                       {"zD", &d.zD}, {"zAd", &d.zAd}, {"zBd", &d.zBd}};
    for (auto& e : entries)
        if (j.contains(e.key))
            *e.seg = parse_domain_segment(j[e.key], where + "." + e.key);
    return d;
}

inline json dump_domain(const BoxDomain& d) {
    json out;
    out["zA"] = dump_domain_segment(d.zA);
    out["zB"] = dump_domain_segment(d.zB);
    out["zC"] = dump_domain_segment(d.zC);
    out["zD"] = dump_domain_segment(d.zD);
    out["zAd"] = dump_domain_segment(d.zAd);
    out["zBd"] = dump_domain_segment(d.zBd);
    return out;
}

inline json dump_point(const ParameterPoint& pt) {
    auto tuple = [](const std::vector<cplx>& v) {
        json out = json::array();
        for (const auto& z : v) out.push_back(dump_complex(z));
        return out;
    };
    json out;
    out["zA"] = tuple(pt.zA);
    out["zB"] = tuple(pt.zB);
    out["zC"] = tuple(pt.zC);
    out["zD"] = tuple(pt.zD);
    if (!pt.zAd.empty() || !pt.zBd.empty()) {
        out["zAd"] = tuple(pt.zAd);
        out["zBd"] = tuple(pt.zBd);
    }
    return out;
}

}  // namespace io_detail

/// Parses a system description. Shape problems raise ValidationError with a
/// field path; JSON syntax problems raise ParseError with the byte location.
inline ModelFile parse_system_json(const json& j) {
    using namespace io_detail;
    if (j.value("format", "") != std::string("lpvcert-system"))
        throw ValidationError("root: expected format 'lpvcert-system'");
    if (j.value("version", 0) != kSystemFormatVersion)
        throw ValidationError("root: unsupported system file version");

    ModelFile file;
    const json& dims = require(j, "dimensions", "root");
    file.system.n = require(dims, "n", "dimensions").get<std::size_t>();
    file.system.m = require(dims, "m", "dimensions").get<std::size_t>();
    file.system.p = require(dims, "p", "dimensions").get<std::size_t>();

    const json& fams = require(j, "families", "root");
    file.system.famA = parse_family(require(fams, "A", "families"), "families.A");
    file.system.famB = parse_family(require(fams, "B", "families"), "families.B");
    file.system.famC = parse_family(require(fams, "C", "families"), "families.C");
    file.system.famD = parse_family(require(fams, "D", "families"), "families.D");

    if (j.contains("perturbation")) {
        const json& pert = j["perturbation"];
        const std::pair<const char*, Channel> chans[] = {
            {"A", Channel::A}, {"B", Channel::B}, {"C", Channel::C}, {"D", Channel::D}};
        for (const auto& [key, ch] : chans)
            if (pert.contains(key))
                file.system.pert.channel(ch) =
                    parse_channel_perturbation(pert[key], std::string("perturbation.") + key);
    }

    if (j.contains("domain"))
        file.domain = parse_domain(j["domain"], "domain");

    if (j.contains("delays")) {
        const json& del = j["delays"];
        DelaySystem d;
        d.base = file.system;
        d.q_ad = del.value("qAd", 0u);
        d.q_bd = del.value("qBd", 0u);
        auto parse_entries = [&](const char* key, const char* fam_key, std::vector<DelayedEntry>& out) {
            if (!del.contains(key))
                return;
            const json& arr = del[key];
            if (!arr.is_array())
                throw ValidationError(std::string("delays.") + key + ": must be an array");
            for (std::size_t e = 0; e < arr.size(); ++e) {
                const std::string ew = std::string("delays.") + key + "[" + std::to_string(e) + "]";
                DelayedEntry entry;
                const json& bound = require(arr[e], "bound", ew);
                if (!bound.is_number() || bound.get<double>() < 0.0)
                    throw ValidationError(ew + ".bound: must be a nonnegative number");
                entry.bound = bound.get<double>();
                entry.fam = parse_family(require(arr[e], fam_key, ew), ew + "." + fam_key);
                if (arr[e].contains("perturbation"))
                    entry.pert = parse_channel_perturbation(arr[e]["perturbation"], ew + ".perturbation");
                out.push_back(std::move(entry));
            }
        };
        parse_entries("internal", "A", d.internal_entries);
        parse_entries("external", "B", d.external_entries);
        file.delays = std::move(d);
    }

    const auto diags = file.has_delays() ? validate(*file.delays) : validate(file.system);
    if (has_errors(diags)) {
        std::string msg = "system description is inconsistent:";
        for (const auto& dg : diags)
            if (dg.severity == Diagnostic::Severity::Error)
                msg += "\n  - " + dg.message;
        throw ValidationError(msg);
    }
    return file;
}

inline json dump_system_json(const ModelFile& file) {
    using namespace io_detail;
    json j;
    j["format"] = "lpvcert-system";
    j["version"] = kSystemFormatVersion;
    j["dimensions"] = {{"n", file.system.n}, {"m", file.system.m}, {"p", file.system.p}};
    json fams;
    fams["A"] = dump_family(file.system.famA);
    fams["B"] = dump_family(file.system.famB);
    fams["C"] = dump_family(file.system.famC);
    fams["D"] = dump_family(file.system.famD);
    j["families"] = std::move(fams);

    json pert;
    const std::pair<const char*, Channel> chans[] = {
        {"A", Channel::A}, {"B", Channel::B}, {"C", Channel::C}, {"D", Channel::D}};
    for (const auto& [key, ch] : chans)
        if (!file.system.pert.channel(ch).trivial())
            pert[key] = dump_channel_perturbation(file.system.pert.channel(ch));
    if (!pert.empty())
        j["perturbation"] = std::move(pert);

    if (file.domain)
        j["domain"] = dump_domain(*file.domain);

    if (file.delays) {
        json del;
        del["qAd"] = file.delays->q_ad;
        del["qBd"] = file.delays->q_bd;
        auto dump_entries = [&](const std::vector<DelayedEntry>& entries, const char* fam_key) {
            json arr = json::array();
            for (const auto& e : entries) {
                json ej;
                ej["bound"] = e.bound;
                ej[fam_key] = dump_family(e.fam);
                if (!e.pert.trivial())
                    ej["perturbation"] = dump_channel_perturbation(e.pert);
                arr.push_back(std::move(ej));
            }
            return arr;
        };
        del["internal"] = dump_entries(file.delays->internal_entries, "A");
        del["external"] = dump_entries(file.delays->external_entries, "B");
        j["delays"] = std::move(del);
    }
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError(path + ": cannot open file");
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Loads and validates a system description file.
inline ModelFile load_system(const std::string& path) {
    try {
        return parse_system_json(read_json_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out)
        throw Error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

/// Uncertainty-value file: per channel an array of matrices aligned with the
/// system's perturbation block order.
inline DeltaAssignment load_delta(const std::string& path, const LpvSystem& sys) {
    using namespace io_detail;
    const json j = read_json_file(path);
    if (j.value("format", "") != std::string("lpvcert-delta"))
        throw ValidationError(path + ": expected format 'lpvcert-delta'");
    DeltaAssignment d = zero_delta(sys);
    const std::pair<const char*, Channel> chans[] = {
        {"A", Channel::A}, {"B", Channel::B}, {"C", Channel::C}, {"D", Channel::D}};
    for (const auto& [key, ch] : chans) {
        if (!j.contains(key))
            continue;
        const json& arr = j[key];
        auto& vals = d.channel(ch);
        if (!arr.is_array() || arr.size() != vals.size())
            throw ValidationError(path + ": channel " + key + " must list one matrix per structure block");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const ComplexMatrix m = parse_matrix(arr[k], std::string(key) + "[" + std::to_string(k) + "]");
            if (m.rows() != vals[k].rows() || m.cols() != vals[k].cols())
                throw ValidationError(path + ": channel " + key + " block " + std::to_string(k) +
                                      " has the wrong shape");
            vals[k] = m;
        }
    }
    return d;
}

inline json dump_delta(const DeltaAssignment& d) {
    using namespace io_detail;
    json j;
    j["format"] = "lpvcert-delta";
    const std::pair<const char*, Channel> chans[] = {
        {"A", Channel::A}, {"B", Channel::B}, {"C", Channel::C}, {"D", Channel::D}};
    for (const auto& [key, ch] : chans) {
        if (d.channel(ch).empty())
            continue;
        json arr = json::array();
        for (const auto& m : d.channel(ch)) arr.push_back(dump_matrix(m));
        j[key] = std::move(arr);
    }
    return j;
}

// ---- report serialization ----

inline json dump_witness(const Witness& w) {
    json j;
    j["s"] = io_detail::dump_complex(w.s);
    j["sigma_min"] = w.sigma_min;
    j["threshold"] = w.threshold;
    j["point"] = io_detail::dump_point(w.point);
    return j;
}

inline json dump_domain_report(const DomainReport& r) {
    json j;
    j["type"] = "domain-report";
    j["property"] = property_name(r.property);
    j["verdict"] = verdict_name(r.verdict);
    if (std::isfinite(r.min_sigma)) {
        j["min_sigma"] = r.min_sigma;
        j["threshold_at_min"] = r.threshold_at_min;
        j["min_margin"] = r.min_margin;
    } else {
        j["vacuous"] = true;
    }
    j["points_tested"] = r.points_tested;
    j["refinement_depth"] = r.refinement_depth;
    j["sufficient_only"] = r.sufficient_only;
    j["tol"] = r.tol;
    j["grid_points_per_dim"] = r.grid_points_per_dim;
    j["budget"] = r.budget;
    json ws = json::array();
    for (const auto& w : r.witnesses) ws.push_back(dump_witness(w));
    j["witnesses"] = std::move(ws);
    return j;
}

inline json dump_radius(const RadiusResult& r) {
    json j;
    j["type"] = "radius";
    j["property"] = property_name(r.property);
    j["eps_c0"] = r.eps_c0;
    j["delta_c0"] = r.delta_c0;
    j["delta"] = r.delta;
    j["block_bound"] = r.block_bound;
    j["omega_truncation"] = r.omega_truncation;
    j["sup_tuple_norm_sq"] = r.sup_tuple_norm_sq;
    j["hermitian_shortcut"] = r.hermitian_shortcut;
    j["samples"] = {{"omega", r.omega_samples}, {"boundary", r.boundary_samples}, {"interior", r.interior_samples}};
    j["note"] = "spectral constants computed on the imaginary axis truncated at omega_truncation = "
                "2*(1 + sup ||A||); beyond it the lower eigenvalue grows like omega^2, so the "
                "truncation only makes the bound more conservative";
    return j;
}

inline json dump_violation(const ViolationWitness& w, double block_bound) {
    json j;
    j["type"] = "violation-witness";
    j["s0"] = io_detail::dump_complex(w.s0);
    j["sigma_min"] = w.sigma_min;
    j["threshold"] = w.threshold;
    j["pert_norm"] = w.pert_norm;
    j["block_bound"] = block_bound;
    j["point"] = io_detail::dump_point(w.point);
    j["delta"] = dump_delta(w.delta);
    return j;
}

inline json dump_cover(const CoverResult& c) {
    json j;
    j["outcome"] = cover_outcome_name(c.outcome);
    j["cells_examined"] = c.certificate.cells_examined;
    j["max_depth"] = c.certificate.max_depth;
    j["floor"] = c.certificate.floor_value;
    if (std::isfinite(c.certificate.min_cell_value))
        j["min_cell_value"] = c.certificate.min_cell_value;
    j["max_cell_width"] = c.certificate.max_cell_width;
    j["max_derivative_bound"] = c.certificate.max_derivative_bound;
    return j;
}

inline json dump_delay_report(const DelayDomainReport& r, const std::vector<double>& h,
                              const std::vector<double>& h2) {
    json j;
    j["type"] = "delay-report";
    j["mode"] = r.independent_mode ? "independent" : "dependent";
    j["property"] = property_name(r.property);
    j["verdict"] = verdict_name(r.verdict);
    j["floor"] = r.floor_value;
    j["search_box"] = {{"sigma", json::array({r.box.sigma_lo, r.box.sigma_hi})},
                       {"omega", json::array({r.box.omega_lo, r.box.omega_hi})}};
    if (!r.independent_mode) {
        j["delays"] = {{"internal", h}, {"external", h2}};
    }
    j["cover"] = dump_cover(r.cover);
    if (r.has_witness) {
        json w;
        w["s"] = io_detail::dump_complex(r.witness_s);
        w["value"] = r.witness_value;
        w["point"] = io_detail::dump_point(r.witness_point);
        if (r.independent_mode) {
            w["lifted"] = {{"rho", r.witness_lifted.rho},
                           {"phi", r.witness_lifted.phi},
                           {"rho_ext", r.witness_lifted.rho2},
                           {"phi_ext", r.witness_lifted.phi2}};
            w["feasible_for_delays"] = r.witness_feasible_for_delays;
            w["spurious_for_delays"] = r.spurious_for_delays;
        }
        j["witness"] = std::move(w);
    }
    return j;
}

}  // namespace lpvcert
