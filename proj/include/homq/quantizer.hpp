#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homq/dilation.hpp"

namespace homq {

/// Map from spherical coordinates to a Euclidean unit vector.
/// angles = [phi_1 .. phi_{n-1}] with phi_i in [0,pi] for i < n-1 and
/// phi_{n-1} in [0,2pi). Throws InvalidInput on out-of-range angles.
Vector from_spherical(const Vector& angles);

/// Inverse map (two-argument arctangent per coordinate); requires |z| = 1
/// to 1e-9. Degenerate tails use the atan2(0,0) = 0 convention.
Vector to_spherical(const Vector& z);

struct AngleBin {
    double center;
    std::int64_t bin;
};

/// Uniform bin of width delta with the index clamped to [0, bins-1] so the
/// center stays inside the angle range. |center - phi| <= delta/2.
AngleBin quantize_angle(double phi, double delta, std::int64_t bins);

/// Worst-case Euclidean distance of two unit vectors whose spherical
/// coordinates differ by at most delta per angle, delta in (0, pi/2).
double prop4_bound(double delta, int n);

// Sizing of the spherical grid for a seed budget N.
struct SphericalLayout {
    int dim = 0;                  // n
    std::int64_t budget = 0;      // N
    std::int64_t bins_polar = 0;  // m: bins per polar angle (azimuthal gets 2m)
    double bins_real = 0.0;       // (N/2)^{1/(n-1)} before flooring
    double delta_step = 0.0;      // pi / m
    std::int64_t seed_count = 0;  // 2 m^{n-1}
    double delta_n = 0.0;         // guaranteed quantization error bound
    bool floored = true;
};

/// Bin counts and error bound for dimension n >= 2 and budget N.
/// floored = false evaluates the error bound with the unfloored bin count
/// (the grid itself always uses integer bins). Throws InvalidInput when the
/// budget yields m <= 2 (the angular step must stay below pi/2).
SphericalLayout budget_to_resolution(int n, std::int64_t N, bool floored = true);

// Finite static quantizer with dilation-cone cells and seeds on the P-unit
// sphere. Angles of the projected state are binned uniformly; bin centers map
// back through the sphere parametrization. Immutable and thread-safe.
class SphericalQuantizer {
  public:
    SphericalQuantizer(SphericalLayout layout, Matrix weight);

    /// Degenerate one-dimensional quantizer: two sign seeds on S^0.
    static SphericalQuantizer scalar(double weight);

    struct Sample {
        Vector seed;        // on the P-unit sphere; zero vector for the origin
        std::int64_t code;  // 0 = origin, 1..seed_count = grid cells
        HomNorm norm;       // canonical norm of the input state
    };

    int dim() const { return layout_.dim; }
    const SphericalLayout& layout() const { return layout_; }
    const Matrix& weight() const { return weight_; }
    std::int64_t seed_count() const { return layout_.seed_count; }
    double delta_n() const { return layout_.delta_n; }

    /// Number of payload bits of an encoded sample.
    int bits() const;

    /// Quantize a state. The dilation must carry the same weight matrix.
    /// s_hint warm-starts the canonical-norm solve.
    Sample quantize(const Dilation& d, const Vector& x,
                    double s_hint = std::numeric_limits<double>::quiet_NaN()) const;

    /// Seed vector for a code; exact (bit-for-bit) match of quantize().seed.
    Vector decode(std::int64_t code) const;

    /// Fixed-width big-endian bit pattern of a code, and its inverse.
    std::vector<std::uint8_t> encode(std::int64_t code) const;
    std::int64_t decode_bits(const std::vector<std::uint8_t>& bytes) const;

    /// Hex rendering of encode() for trace files.
    std::string encode_hex(std::int64_t code) const;

  private:
    SphericalLayout layout_;
    Matrix weight_;
    Matrix weight_sqrt_;
    Matrix weight_sqrt_inv_;

    std::int64_t index_of_bins(const std::vector<std::int64_t>& bins) const;
    std::vector<std::int64_t> bins_of_index(std::int64_t index) const;
    Vector seed_of_bins(const std::vector<std::int64_t>& bins) const;
};

}  // namespace homq
