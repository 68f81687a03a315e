#pragma once

// Multi-scale Gabor wavelet bank and ridge-regression encoding of images as
// wavelet weight vectors.
//
// Each wavelet is an isotropic Gaussian envelope times a grating:
//
//   g(x, y) = exp(-r^2 / (2 sigma^2)) * cos(2 pi f x' - phase)
//
// with f = cycles_per_image / side and x' the offset from the wavelet centre
// along the grating orientation. The envelope width follows from the spatial
// frequency bandwidth b (octaves) through the half-magnitude relation
//
//   sigma = (1/pi) * sqrt(ln 2 / 2) * (2^b + 1) / (2^b - 1) * wavelength,
//
// equivalently sigma_f = f * (2^b - 1) / (2^b + 1) / sqrt(2 ln 2) in frequency.
// For b = 1 this gives sigma ~= 0.562 wavelengths. Wavelets are rasterized on
// the image grid only, so any support outside the borders is dropped
// (no renormalization). Centres for a scale of s cycles lie on an s x s grid.
//
// Images are encoded after subtracting an offset image (the corpus mean in a
// fitted model); the global luminance term is carried by that offset rather
// than by a dedicated DC wavelet.

#include "reveal/image.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace reveal {

using WeightVector = Eigen::VectorXd;

struct GaborBankSpec {
    std::vector<int> scales{3, 6, 11};                    // cycles per image
    std::vector<double> orientations_deg{0, 45, 90, 135};
    std::vector<double> phases_deg{0, 90};
    double bandwidth_octaves = 1.0;
    /// Nominal; with an isotropic envelope the angular bandwidth is fixed by
    /// bandwidth_octaves. Kept so the bank description round-trips.
    double orientation_bandwidth_deg = 41.0;
    int side = 128;

    void validate() const;
    friend bool operator==(const GaborBankSpec&, const GaborBankSpec&) = default;
};

/// sum over scales of s^2 * |phases| * |orientations|
std::size_t bank_size(const GaborBankSpec& spec);

/// Spatial envelope sigma (pixels) for a wavelength (pixels) and octave bandwidth.
double envelope_sigma(double wavelength_px, double bandwidth_octaves);

struct WaveletParams {
    double center_x = 0.0; // pixels, pixel centres at i + 0.5
    double center_y = 0.0;
    double cycles_per_image = 1.0;
    double orientation_deg = 0.0;
    double phase_deg = 0.0;
};

/// One wavelet rasterized onto a side x side grid (row-major).
std::vector<double> rasterize_wavelet(const WaveletParams& p, int side, double bandwidth_octaves);

class GaborBank {
public:
    explicit GaborBank(GaborBankSpec spec);

    const GaborBankSpec& spec() const noexcept { return spec_; }
    int side() const noexcept { return spec_.side; }
    std::size_t size() const noexcept { return params_.size(); }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(spec_.side) * spec_.side; }

    /// pixels x wavelets, one rasterized wavelet per column.
    const Eigen::MatrixXd& basis() const noexcept { return basis_; }
    const WaveletParams& params(std::size_t j) const { return params_[j]; }

private:
    GaborBankSpec spec_;
    std::vector<WaveletParams> params_;
    Eigen::MatrixXd basis_;
};

/// Solves argmin_w |G w - x|^2 + lambda |w|^2 through a Cholesky factorization
/// of (G'G + lambda I) computed once and shared across images.
class RidgeEncoder {
public:
    RidgeEncoder(std::shared_ptr<const GaborBank> bank, double lambda);

    /// 1e-4 * trace(G'G) / n_wavelets
    static double default_lambda(const GaborBank& bank);

    double lambda() const noexcept { return lambda_; }
    const GaborBank& bank() const noexcept { return *bank_; }

    /// Weights for an already-centred pixel vector.
    WeightVector encode_centered(std::span<const double> centered) const;
    /// Columns of `centered` are pixel vectors; returns wavelets x columns.
    Eigen::MatrixXd encode_many(const Eigen::MatrixXd& centered) const;
    /// Encodes image - offset.
    WeightVector encode(const WorkingImage& image, std::span<const double> offset) const;

private:
    std::shared_ptr<const GaborBank> bank_;
    double lambda_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Convenience: ridge-encode against a flat offset of `offset_level`.
WeightVector encode(const GaborBank& bank, const WorkingImage& image, double lambda, double offset_level = 0.0);

/// offset + G w. No clipping; export clips.
WorkingImage render(const GaborBank& bank, const WeightVector& weights, std::span<const double> offset);
WorkingImage render(const GaborBank& bank, const WeightVector& weights, double offset_level = 0.0);

} // namespace reveal
