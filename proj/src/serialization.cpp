#include "homq/serialization.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace homq {

Json matrix_to_json(const Matrix& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw InvalidInput("matrix_from_json: expected an array of rows");
    const auto rows = j.size();
    const auto cols = j[0].size();
    Matrix M(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw InvalidInput("matrix_from_json: ragged rows");
        for (size_t c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
    }
    return M;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j) {
    if (!j.is_array()) throw InvalidInput("vector_from_json: expected an array");
    Vector v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

Json certificate_to_json(const CertificateFile& cert) {
    Json j;
    j["A"] = matrix_to_json(cert.A);
    j["B"] = matrix_to_json(cert.B);
    j["G0"] = matrix_to_json(cert.G0);
    j["K0"] = matrix_to_json(cert.K0);
    j["Gd"] = matrix_to_json(cert.Gd);
    j["X"] = matrix_to_json(cert.gains.X);
    j["Y"] = matrix_to_json(cert.gains.Y);
    j["K"] = matrix_to_json(cert.gains.K);
    j["P"] = matrix_to_json(cert.gains.P);
    j["delta"] = cert.gains.delta;
    j["tau"] = cert.gains.tau;
    j["margins"] = {{"mono", cert.gains.margin_mono},
                    {"posdef", cert.gains.margin_posdef},
                    {"W", cert.gains.margin_w}};
    j["rho"] = cert.gains.rho;
    return j;
}

CertificateFile certificate_from_json(const Json& j) {
    try {
        CertificateFile cert;
        cert.A = matrix_from_json(j.at("A"));
        cert.B = matrix_from_json(j.at("B"));
        cert.G0 = matrix_from_json(j.at("G0"));
        cert.K0 = matrix_from_json(j.at("K0"));
        cert.Gd = matrix_from_json(j.at("Gd"));
        cert.gains.X = matrix_from_json(j.at("X"));
        cert.gains.Y = matrix_from_json(j.at("Y"));
        cert.gains.K = matrix_from_json(j.at("K"));
        cert.gains.P = matrix_from_json(j.at("P"));
        cert.gains.delta = j.at("delta").get<double>();
        cert.gains.tau = j.at("tau").get<double>();
        cert.gains.margin_mono = j.at("margins").at("mono").get<double>();
        cert.gains.margin_posdef = j.at("margins").at("posdef").get<double>();
        cert.gains.margin_w = j.at("margins").at("W").get<double>();
        cert.gains.rho = j.at("rho").get<double>();
        return cert;
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("certificate_from_json: ") + e.what());
    }
}

Json quantizer_to_json(const SphericalQuantizer& q) {
    const auto& layout = q.layout();
    Json j;
    j["n"] = layout.dim;
    j["N"] = layout.budget;
    j["m"] = layout.bins_polar;
    j["delta_step"] = layout.delta_step;
    j["delta_N"] = layout.delta_n;
    j["P"] = matrix_to_json(q.weight());
    j["floor_mode"] = layout.floored;
    return j;
}

SphericalQuantizer quantizer_from_json(const Json& j) {
    try {
        int n = j.at("n").get<int>();
        Matrix P = matrix_from_json(j.at("P"));
        if (n == 1) return SphericalQuantizer::scalar(P(0, 0));
        auto layout = budget_to_resolution(n, j.at("N").get<std::int64_t>(),
                                           j.at("floor_mode").get<bool>());
        return SphericalQuantizer(layout, std::move(P));
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("quantizer_from_json: ") + e.what());
    }
}

std::string config_hash(const Json& j) {
    const std::string dump = j.dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : dump) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
    return buf;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path, const std::string& hash,
                          int decimation) {
    if (decimation < 1) decimation = 1;
    std::ofstream out(path);
    if (!out) throw InvalidInput("write_trajectory_csv: cannot open " + path);
    out << "# config_hash=" << hash << "\n";
    const auto n = traj.states.empty() ? 0 : traj.states.front().size();
    const auto m = traj.controls.empty() ? 0 : traj.controls.front().size();
    out << "t";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << (i + 1);
    for (Eigen::Index i = 0; i < m; ++i) out << ",u" << (i + 1);
    out << ",seed_index,hom_norm,lyap_rate\n";
    const int hex_digits = std::max(1, (traj.code_bits + 7) / 8 * 2);
    char code_buf[24];
    for (size_t k = 0; k < traj.times.size(); k += static_cast<size_t>(decimation)) {
        out << fmt(traj.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt(traj.states[k](i));
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << fmt(traj.controls[k](i));
        // seed codes go out as fixed-width hex bit strings
        std::snprintf(code_buf, sizeof(code_buf), "0x%0*llx", hex_digits,
                      static_cast<unsigned long long>(traj.seed_codes[k]));
        out << ',' << code_buf << ',' << fmt(traj.hom_norm[k]) << ',' << fmt(traj.lyap_rate[k])
            << "\n";
    }
}

Json trajectory_summary(const Trajectory& traj, const LyapunovReport* lyap,
                        const std::string& hash) {
    Json j;
    j["config_hash"] = hash;
    if (traj.settling_time)
        j["settling_time"] = *traj.settling_time;
    else
        j["settling_time"] = nullptr;
    j["final_hom_norm"] = traj.hom_norm.empty() ? 0.0 : traj.hom_norm.back();
    j["max_pert_margin"] = traj.max_pert_margin;
    j["max_kappa_observed"] = traj.max_kappa_observed;
    j["kappa_within_budget"] = traj.kappa_within_budget;
    if (lyap) {
        j["median_rate"] = lyap->median_rate;
        j["violation_fraction"] = lyap->violation_fraction;
        j["nonincrease_fraction"] = lyap->nonincrease_fraction;
    }
    return j;
}

}  // namespace homq
