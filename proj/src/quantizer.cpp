#include "homq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace homq {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 2 * m^{n-1}, clamped to avoid overflow for absurd inputs.
std::int64_t seed_count_for(std::int64_t m, int n) {
    std::int64_t count = 2;
    for (int i = 0; i < n - 1; ++i) {
        if (count > (std::int64_t{1} << 62) / m) return std::int64_t{1} << 62;
        count *= m;
    }
    return count;
}

}  // namespace

Vector from_spherical(const Vector& angles) {
    const int n = static_cast<int>(angles.size()) + 1;
    if (n < 2) throw InvalidInput("from_spherical: need at least one angle");
    for (int i = 0; i + 1 < n - 1; ++i)
        if (!(angles[i] >= 0.0 && angles[i] <= kPi))
            throw InvalidInput("from_spherical: polar angle out of [0,pi]");
    if (!(angles[n - 2] >= 0.0 && angles[n - 2] < kTwoPi))
        throw InvalidInput("from_spherical: azimuthal angle out of [0,2pi)");

    Vector z(n);
    double sines = 1.0;
    z[0] = std::cos(angles[0]);
    for (int k = 1; k < n - 1; ++k) {
        sines *= std::sin(angles[k - 1]);
        z[k] = std::cos(angles[k]) * sines;
    }
    sines *= std::sin(angles[n - 2]);
    z[n - 1] = sines;
    return z;
}

Vector to_spherical(const Vector& z) {
    const int n = static_cast<int>(z.size());
    if (n < 2) throw InvalidInput("to_spherical: need dimension >= 2");
    if (std::abs(z.norm() - 1.0) > 1e-9) throw InvalidInput("to_spherical: input is not a unit vector");

    Vector angles(n - 1);
    for (int i = 0; i < n - 2; ++i) {
        double tail = std::sqrt(z.tail(n - 1 - i).squaredNorm());
        angles[i] = (tail == 0.0 && z[i] == 0.0) ? 0.0 : std::atan2(tail, z[i]);
    }
    double a = (z[n - 1] == 0.0 && z[n - 2] == 0.0) ? 0.0 : std::atan2(z[n - 1], z[n - 2]);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;  // 2pi wraps to the first bin
    angles[n - 2] = a;
    return angles;
}

AngleBin quantize_angle(double phi, double delta, std::int64_t bins) {
    if (!(delta > 0.0) || bins < 1) throw InvalidInput("quantize_angle: bad bin layout");
    auto bin = static_cast<std::int64_t>(std::floor(phi / delta));
    bin = std::clamp<std::int64_t>(bin, 0, bins - 1);
    return {(static_cast<double>(bin) + 0.5) * delta, bin};
}

double prop4_bound(double delta, int n) {
    if (!(delta > 0.0 && delta < kPi / 2.0)) throw InvalidInput("prop4_bound: delta out of (0,pi/2)");
    if (n < 2) throw InvalidInput("prop4_bound: dimension must be >= 2");
    double c = std::pow(std::cos(delta / 2.0), 2 * (n - 1));
    return std::sqrt(2.0 - 2.0 * (2.0 * c - 1.0));
}

SphericalLayout budget_to_resolution(int n, std::int64_t N, bool floored) {
    if (n < 2) throw InvalidInput("budget_to_resolution: dimension must be >= 2");
    if (N < 2) throw InvalidInput("budget_to_resolution: budget must be >= 2");

    double m_real = std::pow(static_cast<double>(N) / 2.0, 1.0 / static_cast<double>(n - 1));
    // Exact integer floor of (N/2)^{1/(n-1)}: largest m with 2 m^{n-1} <= N.
    auto m = static_cast<std::int64_t>(std::floor(m_real)) + 2;
    while (m > 1 && seed_count_for(m, n) > N) --m;
    if (m <= 2) throw InvalidInput("budget_to_resolution: budget too small (needs m >= 3)");

    SphericalLayout layout;
    layout.dim = n;
    layout.budget = N;
    layout.bins_polar = m;
    layout.bins_real = m_real;
    layout.delta_step = kPi / static_cast<double>(m);
    layout.seed_count = seed_count_for(m, n);
    layout.floored = floored;
    double delta_eff = floored ? layout.delta_step : kPi / m_real;
    layout.delta_n = 2.0 * std::sqrt(1.0 - std::pow(std::cos(delta_eff / 2.0), 2 * (n - 1)));
    return layout;
}

SphericalQuantizer::SphericalQuantizer(SphericalLayout layout, Matrix weight)
    : layout_(layout), weight_(std::move(weight)) {
    if (layout_.dim < 1) throw InvalidInput("SphericalQuantizer: bad dimension");
    if (weight_.rows() != layout_.dim || weight_.cols() != layout_.dim)
        throw InvalidInput("SphericalQuantizer: weight dimension mismatch");
    if (layout_.dim >= 2 && layout_.bins_polar < 3)
        throw InvalidInput("SphericalQuantizer: angular step must be below pi/2");
    weight_sqrt_ = spd_sqrt(weight_);
    weight_sqrt_inv_ = weight_sqrt_.inverse();
}

SphericalQuantizer SphericalQuantizer::scalar(double weight) {
    if (!(weight > 0.0)) throw InvalidInput("SphericalQuantizer::scalar: weight must be positive");
    SphericalLayout layout;
    layout.dim = 1;
    layout.budget = 2;
    layout.bins_polar = 1;
    layout.bins_real = 1.0;
    layout.delta_step = 0.0;
    layout.seed_count = 2;  // S^0 = {-1/sqrt(P), +1/sqrt(P)}
    layout.delta_n = 0.0;
    Matrix P(1, 1);
    P(0, 0) = weight;
    return SphericalQuantizer(layout, P);
}

int SphericalQuantizer::bits() const {
    std::int64_t states = layout_.seed_count + 1;  // + origin code
    int bits = 0;
    while ((std::int64_t{1} << bits) < states) ++bits;
    return bits;
}

std::int64_t SphericalQuantizer::index_of_bins(const std::vector<std::int64_t>& bins) const {
    const int n = layout_.dim;
    const std::int64_t m = layout_.bins_polar;
    std::int64_t index = 0;
    for (int i = 0; i < n - 1; ++i) {
        std::int64_t radix = (i == n - 2) ? 2 * m : m;
        index = index * radix + bins[i];
    }
    return index;
}

std::vector<std::int64_t> SphericalQuantizer::bins_of_index(std::int64_t index) const {
    const int n = layout_.dim;
    const std::int64_t m = layout_.bins_polar;
    std::vector<std::int64_t> bins(n - 1);
    for (int i = n - 2; i >= 0; --i) {
        std::int64_t radix = (i == n - 2) ? 2 * m : m;
        bins[i] = index % radix;
        index /= radix;
    }
    return bins;
}

Vector SphericalQuantizer::seed_of_bins(const std::vector<std::int64_t>& bins) const {
    Vector centers(layout_.dim - 1);
    for (int i = 0; i < layout_.dim - 1; ++i)
        centers[i] = (static_cast<double>(bins[i]) + 0.5) * layout_.delta_step;
    return weight_sqrt_inv_ * from_spherical(centers);
}

SphericalQuantizer::Sample SphericalQuantizer::quantize(const Dilation& d, const Vector& x,
                                                        double s_hint) const {
    if (!x.allFinite()) throw InvalidInput("quantize: non-finite state");
    if (x.size() != layout_.dim) throw InvalidInput("quantize: state dimension mismatch");
    if (!d.weight().isApprox(weight_, 1e-12))
        throw InvalidInput("quantize: dilation and quantizer weights disagree");

    Sample out;
    if (d.near_origin(x)) {
        out.seed = Vector::Zero(layout_.dim);
        out.code = 0;
        out.norm = {0.0, -std::numeric_limits<double>::infinity()};
        return out;
    }
    out.norm = d.canonical_norm(x, s_hint);
    Vector projected = d.apply(-out.norm.log_value, x);

    if (layout_.dim == 1) {
        double sign = projected[0] >= 0.0 ? 1.0 : -1.0;
        out.seed = sign * weight_sqrt_inv_.col(0);
        out.code = sign > 0.0 ? 1 : 2;
        return out;
    }

    Vector unit = weight_sqrt_ * projected;
    unit /= unit.norm();  // remove the projector's own 1e-12 residual
    Vector angles = to_spherical(unit);

    const std::int64_t m = layout_.bins_polar;
    std::vector<std::int64_t> bins(layout_.dim - 1);
    for (int i = 0; i < layout_.dim - 1; ++i) {
        std::int64_t count = (i == layout_.dim - 2) ? 2 * m : m;
        bins[i] = quantize_angle(angles[i], layout_.delta_step, count).bin;
    }
    out.seed = seed_of_bins(bins);
    out.code = index_of_bins(bins) + 1;
    return out;
}

Vector SphericalQuantizer::decode(std::int64_t code) const {
    if (code < 0 || code > layout_.seed_count)
        throw InvalidInput("decode: code out of range");
    if (code == 0) return Vector::Zero(layout_.dim);
    if (layout_.dim == 1) return (code == 1 ? 1.0 : -1.0) * weight_sqrt_inv_.col(0);
    return seed_of_bins(bins_of_index(code - 1));
}

std::vector<std::uint8_t> SphericalQuantizer::encode(std::int64_t code) const {
    if (code < 0 || code > layout_.seed_count) throw InvalidInput("encode: code out of range");
    const int width = bits();
    std::vector<std::uint8_t> bytes((width + 7) / 8, 0);
    for (int b = 0; b < width; ++b) {
        int pos = width - 1 - b;  // big-endian bit order
        if ((code >> b) & 1) bytes[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
    return bytes;
}

std::int64_t SphericalQuantizer::decode_bits(const std::vector<std::uint8_t>& bytes) const {
    const int width = bits();
    if (static_cast<int>(bytes.size()) != (width + 7) / 8)
        throw InvalidInput("decode_bits: wrong payload size");
    std::int64_t code = 0;
    for (int pos = 0; pos < width; ++pos) {
        int bit = (bytes[pos / 8] >> (7 - pos % 8)) & 1;
        code = (code << 1) | bit;
    }
    if (code > layout_.seed_count) throw InvalidInput("decode_bits: code out of range");
    return code;
}

std::string SphericalQuantizer::encode_hex(std::int64_t code) const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::uint8_t byte : encode(code)) {
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0xf]);
    }
    return out;
}

}  // namespace homq
