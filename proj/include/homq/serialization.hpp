#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "homq/quantizer.hpp"
#include "homq/simulator.hpp"
#include "homq/synthesis.hpp"

namespace homq {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& M);  // row-major nested arrays
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

// Full certificate document: plant, homogenization and gain data.
struct CertificateFile {
    Matrix A, B, G0, K0, Gd;
    GainCertificate gains;
};

Json certificate_to_json(const CertificateFile& cert);
CertificateFile certificate_from_json(const Json& j);

Json quantizer_to_json(const SphericalQuantizer& q);
SphericalQuantizer quantizer_from_json(const Json& j);

/// FNV-1a over the canonical dump of a JSON document, as a hex string.
std::string config_hash(const Json& j);

/// Trajectory CSV: `t,x1..xn,u1..um,seed_index,hom_norm,lyap_rate`, one row
/// per `decimation` steps, preceded by a `# config_hash=` comment line.
void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          const std::string& hash, int decimation = 1);

Json trajectory_summary(const Trajectory& traj, const LyapunovReport* lyap,
                        const std::string& hash);

}  // namespace homq
