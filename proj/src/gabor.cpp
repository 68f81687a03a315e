#include "reveal/gabor.hpp"

#include "reveal/error.hpp"
#include "reveal/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace reveal {

void GaborBankSpec::validate() const
{
    require(!scales.empty() && !orientations_deg.empty() && !phases_deg.empty(), ErrorCode::InvalidSpec,
            "gabor spec needs at least one scale, orientation and phase");
    require(std::all_of(scales.begin(), scales.end(), [](int s) { return s >= 1; }), ErrorCode::InvalidSpec,
            "gabor scales must be >= 1 cycle per image");
    require(bandwidth_octaves > 0.0, ErrorCode::InvalidSpec, "bandwidth must be positive");
    const int finest = *std::max_element(scales.begin(), scales.end());
    require(side >= 2 * finest, ErrorCode::InvalidSpec,
            "side " + std::to_string(side) + " too small for " + std::to_string(finest) + " cycles per image");
}

std::size_t bank_size(const GaborBankSpec& spec)
{
    std::size_t n = 0;
    for (int s : spec.scales) {
        n += static_cast<std::size_t>(s) * s * spec.phases_deg.size() * spec.orientations_deg.size();
    }
    return n;
}

double envelope_sigma(double wavelength_px, double bandwidth_octaves)
{
    const double r = std::exp2(bandwidth_octaves);
    return std::sqrt(std::numbers::ln2 / 2.0) / std::numbers::pi * (r + 1.0) / (r - 1.0) * wavelength_px;
}

std::vector<double> rasterize_wavelet(const WaveletParams& p, int side, double bandwidth_octaves)
{
    const double f = p.cycles_per_image / side;
    const double sigma = envelope_sigma(1.0 / f, bandwidth_octaves);
    const double theta = p.orientation_deg * std::numbers::pi / 180.0;
    const double phase = p.phase_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < side; ++y) {
        const double dy = y + 0.5 - p.center_y;
        for (int x = 0; x < side; ++x) {
            const double dx = x + 0.5 - p.center_x;
            const double along = dx * c + dy * s;
            out[static_cast<std::size_t>(y) * side + x] =
                std::exp(-(dx * dx + dy * dy) * inv2s2) * std::cos(2.0 * std::numbers::pi * f * along - phase);
        }
    }
    return out;
}

GaborBank::GaborBank(GaborBankSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
    for (int s : spec_.scales) {
        const double spacing = static_cast<double>(spec_.side) / s;
        for (int gy = 0; gy < s; ++gy) {
            for (int gx = 0; gx < s; ++gx) {
                for (double o : spec_.orientations_deg) {
                    for (double ph : spec_.phases_deg) {
                        params_.push_back({(gx + 0.5) * spacing, (gy + 0.5) * spacing, static_cast<double>(s), o, ph});
                    }
                }
            }
        }
    }
    basis_.resize(static_cast<Eigen::Index>(pixels()), static_cast<Eigen::Index>(params_.size()));
    for (std::size_t j = 0; j < params_.size(); ++j) {
        const auto col = rasterize_wavelet(params_[j], spec_.side, spec_.bandwidth_octaves);
        basis_.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(col.data(), col.size());
    }
}

RidgeEncoder::RidgeEncoder(std::shared_ptr<const GaborBank> bank, double lambda)
    : bank_(std::move(bank)), lambda_(lambda)
{
    require(bank_ != nullptr, ErrorCode::InvalidInput, "encoder needs a bank");
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidInput, "ridge penalty must be >= 0");
    const auto& g = bank_->basis();
    const Eigen::Index n = g.cols();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(g.transpose());
    gram.diagonal().array() += lambda;
    llt_.compute(gram);
    require(llt_.info() == Eigen::Success, ErrorCode::InvalidSpec,
            "ridge system is not positive definite; increase lambda");
}

double RidgeEncoder::default_lambda(const GaborBank& bank)
{
    return 1e-4 * bank.basis().squaredNorm() / static_cast<double>(bank.size());
}

WeightVector RidgeEncoder::encode_centered(std::span<const double> centered) const
{
    require(centered.size() == bank_->pixels(), ErrorCode::InvalidInput, "pixel count does not match bank");
    const Eigen::Map<const Eigen::VectorXd> x(centered.data(), static_cast<Eigen::Index>(centered.size()));
    require(x.allFinite(), ErrorCode::InvalidInput, "non-finite pixels");
    return llt_.solve(bank_->basis().transpose() * x);
}

Eigen::MatrixXd RidgeEncoder::encode_many(const Eigen::MatrixXd& centered) const
{
    require(centered.rows() == static_cast<Eigen::Index>(bank_->pixels()), ErrorCode::InvalidInput,
            "pixel count does not match bank");
    require(centered.allFinite(), ErrorCode::InvalidInput, "non-finite pixels");
    return llt_.solve(bank_->basis().transpose() * centered);
}

WeightVector RidgeEncoder::encode(const WorkingImage& image, std::span<const double> offset) const
{
    require(image.side() == bank_->side(), ErrorCode::InvalidInput, "image side does not match bank");
    require(offset.size() == image.size(), ErrorCode::InvalidInput, "offset size does not match image");
    std::vector<double> centered(image.data());
    simd::axpy(-1.0, offset, centered);
    return encode_centered(centered);
}

WeightVector encode(const GaborBank& bank, const WorkingImage& image, double lambda, double offset_level)
{
    // Non-owning alias: the encoder does not outlive this call.
    RidgeEncoder enc(std::shared_ptr<const GaborBank>(std::shared_ptr<const GaborBank>(), &bank), lambda);
    const std::vector<double> offset(image.size(), offset_level);
    return enc.encode(image, offset);
}

WorkingImage render(const GaborBank& bank, const WeightVector& weights, std::span<const double> offset)
{
    require(weights.size() == static_cast<Eigen::Index>(bank.size()), ErrorCode::InvalidInput,
            "weight length does not match bank");
    require(offset.size() == bank.pixels(), ErrorCode::InvalidInput, "offset size does not match bank");
    std::vector<double> px(bank.pixels());
    const auto& g = bank.basis();
    simd::gemv({g.data(), static_cast<std::size_t>(g.size())}, bank.pixels(), bank.size(),
               {weights.data(), static_cast<std::size_t>(weights.size())}, px);
    simd::axpy(1.0, offset, px);
    return WorkingImage(bank.side(), std::move(px));
}

WorkingImage render(const GaborBank& bank, const WeightVector& weights, double offset_level)
{
    const std::vector<double> offset(bank.pixels(), offset_level);
    return render(bank, weights, offset);
}

} // namespace reveal
