#pragma once

// JSON artifact for an LPV model plus its scheduling map.
//
// {
//   "format_version": 1,
//   "kind": "lpvss",
//   "dims": {"nx": 2, "nu": 1, "ny": 1, "np": 1},
//   "time": {"domain": "continuous"} | {"domain": "discrete", "sample_time": -1},
//   "A": [M0, M1, ...],   each M = {"rows": r, "cols": c, "data": [row-major]}
//   "B": [...], "C": [...], "D": [...],
//   "V": [...], "W": [...],
//   "anchor": {"x": [...], "u": [...]},
//   "scheduling_map": {"entries": ["sinc(x1)"], "footprint": [["x1"]],
//                      "quadrature": {"abs_tol": .., "rel_tol": .., "max_subdivisions": ..}},
//   "range": {"grid_per_dim": N, "box": {"x": [[lo, hi]], "u": [[lo, hi]]},
//             "raw": [[lo, hi]], "widened": [[lo, hi]]},          (optional)
//   "provenance": {"source": "...", "integration": "analytic", "extraction": "factor",
//                  "warnings": [...]},
//   "verification": {...}                                          (optional)
// }

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lpvembed/lpv.hpp"
#include "lpvembed/parse.hpp"
#include "lpvembed/sim.hpp"

namespace lpvembed {

using json = nlohmann::json;

inline constexpr int kArtifactFormatVersion = 1;

class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline json matrix_json(const Eigen::MatrixXd& M) {
    json data = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) data.push_back(M(i, j));
    return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", data}};
}

inline Eigen::MatrixXd matrix_from(const json& j) {
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r * c) throw ArtifactError("matrix data has wrong length");
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index k = 0; k < c; ++k) M(i, k) = data.at(static_cast<std::size_t>(i * c + k)).get<double>();
    return M;
}

inline json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json intervals_json(const std::vector<Interval>& ivs) {
    json out = json::array();
    for (const auto& iv : ivs) out.push_back({iv.lo, iv.hi});
    return out;
}

inline std::vector<Interval> intervals_from(const json& j) {
    std::vector<Interval> out;
    for (const auto& p : j) {
        if (p.size() != 2) throw ArtifactError("interval needs two bounds");
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

inline json family_json(const AffineMatrix& M) {
    json out = json::array();
    for (const auto& c : M.coeffs) out.push_back(matrix_json(c));
    return out;
}

inline AffineMatrix family_from(const json& j) {
    AffineMatrix M;
    for (const auto& c : j) M.coeffs.push_back(matrix_from(c));
    return M;
}

inline IntegrationMode integration_from(const std::string& s) {
    if (s == "analytic") return IntegrationMode::Analytic;
    if (s == "numeric") return IntegrationMode::Numeric;
    throw ArtifactError("unknown integration mode '" + s + "'");
}

inline Extraction extraction_from(const std::string& s) {
    if (s == "element") return Extraction::Element;
    if (s == "factor") return Extraction::Factor;
    throw ArtifactError("unknown extraction mode '" + s + "'");
}

}  // namespace detail

inline json box_json(const Box& box) {
    return {{"x", detail::intervals_json(box.x)}, {"u", detail::intervals_json(box.u)}};
}

inline Box box_from_json(const json& j) { return {detail::intervals_from(j.at("x")), detail::intervals_from(j.at("u"))}; }

inline json range_json(const RangeBox& rb) {
    return {{"grid_per_dim", rb.grid_per_dim},
            {"box", box_json(rb.sampled_box)},
            {"raw", detail::intervals_json(rb.raw)},
            {"widened", detail::intervals_json(rb.widened)}};
}

inline json report_json(const EmbeddingReport& r) {
    return {{"samples", r.samples},
            {"state_residual", r.state_residual},
            {"output_residual", r.output_residual},
            {"worst_state_point", {{"x", detail::vector_json(r.worst_state_x)}, {"u", detail::vector_json(r.worst_state_u)}}},
            {"worst_output_point",
             {{"x", detail::vector_json(r.worst_output_x)}, {"u", detail::vector_json(r.worst_output_u)}}}};
}

inline json to_json(const LpvEmbedding& emb) {
    const LpvssModel& m = emb.model;
    const SchedulingMap& sm = emb.map;
    json time = m.time.is_discrete() ? json{{"domain", "discrete"}, {"sample_time", m.time.sample_time}}
                                     : json{{"domain", "continuous"}};
    json entries = json::array();
    for (const auto& e : sm.entries) entries.push_back(to_string(e));
    json j = {
        {"format_version", kArtifactFormatVersion},
        {"kind", "lpvss"},
        {"dims", {{"nx", m.nx}, {"nu", m.nu}, {"ny", m.ny}, {"np", m.np}}},
        {"time", time},
        {"A", detail::family_json(m.A)},
        {"B", detail::family_json(m.B)},
        {"C", detail::family_json(m.C)},
        {"D", detail::family_json(m.D)},
        {"V", detail::vector_json(m.V)},
        {"W", detail::vector_json(m.W)},
        {"anchor", {{"x", detail::vector_json(m.anchor.x_bar)}, {"u", detail::vector_json(m.anchor.u_bar)}}},
        {"scheduling_map",
         {{"entries", entries},
          {"footprint", sm.footprint()},
          {"quadrature",
           {{"abs_tol", sm.quad.abs_tol}, {"rel_tol", sm.quad.rel_tol}, {"max_subdivisions", sm.quad.max_subdivisions}}}}},
        {"provenance",
         {{"source", m.provenance.source},
          {"integration", to_string(m.provenance.integration)},
          {"extraction", to_string(m.provenance.extraction)},
          {"warnings", m.provenance.warnings}}},
    };
    if (m.range) j["range"] = range_json(*m.range);
    return j;
}

inline LpvEmbedding embedding_from_json(const json& j) {
    try {
        if (j.at("format_version").get<int>() != kArtifactFormatVersion)
            throw ArtifactError("unsupported artifact format_version " + j.at("format_version").dump());
        if (j.at("kind").get<std::string>() != "lpvss") throw ArtifactError("artifact kind is not 'lpvss'");
        LpvEmbedding emb;
        LpvssModel& m = emb.model;
        const auto& dims = j.at("dims");
        m.nx = dims.at("nx").get<int>();
        m.nu = dims.at("nu").get<int>();
        m.ny = dims.at("ny").get<int>();
        m.np = dims.at("np").get<int>();
        const auto& time = j.at("time");
        if (time.at("domain") == "continuous") m.time = TimeDomain::continuous();
        else if (time.at("domain") == "discrete") m.time = TimeDomain::discrete(time.at("sample_time").get<double>());
        else throw ArtifactError("unknown time domain");
        m.A = detail::family_from(j.at("A"));
        m.B = detail::family_from(j.at("B"));
        m.C = detail::family_from(j.at("C"));
        m.D = detail::family_from(j.at("D"));
        m.V = detail::vector_from(j.at("V"));
        m.W = detail::vector_from(j.at("W"));
        if (j.contains("anchor")) {
            m.anchor = {detail::vector_from(j["anchor"].at("x")), detail::vector_from(j["anchor"].at("u"))};
        } else {
            m.anchor = Anchor::origin(m.nx, m.nu);
        }
        const auto& prov = j.at("provenance");
        m.provenance.source = prov.value("source", "");
        m.provenance.integration = detail::integration_from(prov.at("integration").get<std::string>());
        m.provenance.extraction = detail::extraction_from(prov.at("extraction").get<std::string>());
        m.provenance.warnings = prov.value("warnings", std::vector<std::string>{});
        m.provenance.anchor = m.anchor;

        const auto& sched = j.at("scheduling_map");
        ParseOptions popts;
        popts.nx = m.nx;
        popts.nu = m.nu;
        for (const auto& s : sched.at("entries")) emb.map.entries.push_back(parse_expr(s.get<std::string>(), popts));
        if (sched.contains("quadrature")) {
            const auto& q = sched["quadrature"];
            emb.map.quad.abs_tol = q.value("abs_tol", emb.map.quad.abs_tol);
            emb.map.quad.rel_tol = q.value("rel_tol", emb.map.quad.rel_tol);
            emb.map.quad.max_subdivisions = q.value("max_subdivisions", emb.map.quad.max_subdivisions);
        }
        if (emb.map.np() != m.np) throw ArtifactError("scheduling map has " + std::to_string(emb.map.np()) + " entries, np = " + std::to_string(m.np));

        if (j.contains("range")) {
            const auto& r = j["range"];
            RangeBox rb;
            rb.grid_per_dim = r.at("grid_per_dim").get<int>();
            rb.sampled_box = box_from_json(r.at("box"));
            rb.raw = detail::intervals_from(r.at("raw"));
            rb.widened = detail::intervals_from(r.at("widened"));
            m.range = rb;
        }
        m.check();
        return emb;
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("malformed artifact: ") + e.what());
    } catch (const DimensionError& e) {
        throw ArtifactError(std::string("inconsistent artifact: ") + e.what());
    }
}

inline void save_embedding(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

inline LpvEmbedding load_embedding(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open artifact '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("artifact is not valid JSON: ") + e.what());
    }
    return embedding_from_json(j);
}

/// JSON mirror of the trajectory CSV.
inline json trajectory_json(const Trajectory& tr) {
    auto rows = [](const Eigen::MatrixXd& M) {
        json out = json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            Eigen::VectorXd r = M.row(i).transpose();
            out.push_back(detail::vector_json(r));
        }
        return out;
    };
    return {{"format_version", kTrajectoryFormatVersion}, {"t", tr.t}, {"x", rows(tr.x)},
            {"y", rows(tr.y)}, {"u", rows(tr.u)}, {"p", rows(tr.p)}};
}

}  // namespace lpvembed
