#include "fixtures.hpp"

#include "reveal/error.hpp"
#include "reveal/similarity.hpp"

#include <Eigen/QR>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace reveal;

namespace {

GaborBankSpec tiny_spec()
{
    GaborBankSpec spec;
    spec.side = 8;
    spec.scales = {1, 2};
    return spec;
}

// Ridge solution as the least-squares solution of [G; sqrt(lambda) I] w = [x; 0].
Eigen::VectorXd ridge_oracle(const Eigen::MatrixXd& g, const Eigen::VectorXd& x, double lambda)
{
    const Eigen::Index p = g.rows(), n = g.cols();
    Eigen::MatrixXd a(p + n, n);
    a.topRows(p) = g;
    a.bottomRows(n) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p + n);
    b.head(p) = x;
    return a.householderQr().solve(b);
}

double energy(const std::vector<double>& v)
{
    double e = 0.0;
    for (double x : v) {
        e += x * x;
    }
    return e;
}

} // namespace

TEST_CASE("default bank at side 128 has 1328 wavelets")
{
    GaborBankSpec spec;
    CHECK(bank_size(spec) == 1328);
    CHECK(GaborBank(spec).size() == 1328);
}

TEST_CASE("bank size counts scales squared times orientations times phases")
{
    GaborBankSpec spec;
    spec.scales = {4};
    spec.orientations_deg = {0};
    spec.phases_deg = {0, 90};
    spec.side = 16;
    CHECK(bank_size(spec) == 32);
    CHECK(bank_size(tiny_spec()) == 40);
}

TEST_CASE("invalid specs are rejected")
{
    auto expect_invalid = [](GaborBankSpec s) {
        try {
            GaborBank b(s);
            FAIL("expected InvalidSpec");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidSpec);
        }
    };
    GaborBankSpec s = tiny_spec();
    s.scales = {};
    expect_invalid(s);
    s = tiny_spec();
    s.scales = {0};
    expect_invalid(s);
    s = tiny_spec();
    s.bandwidth_octaves = 0.0;
    expect_invalid(s);
    s = tiny_spec();
    s.side = 0;
    expect_invalid(s);
}

TEST_CASE("envelope sigma follows the octave-bandwidth relation")
{
    // b = 1 octave: sigma = sqrt(ln 2 / 2) / pi * 3 * lambda
    const double expect = std::sqrt(std::log(2.0) / 2.0) / std::numbers::pi * 3.0 * 10.0;
    CHECK(envelope_sigma(10.0, 1.0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(envelope_sigma(10.0, 1.0) / 10.0 == doctest::Approx(0.5622).epsilon(1e-3));
}

TEST_CASE("untruncated wavelet energy matches the closed-form integral for every orientation")
{
    // sum g^2 ~ (pi sigma^2 / 2) (1 + exp(-4 pi^2 f^2 sigma^2) cos 2phi) on a canvas
    // much larger than the envelope.
    const int side = 256;
    const double cycles = 16.0;
    const double f = cycles / side;
    const double sigma = envelope_sigma(1.0 / f, 1.0);
    for (double phase : {0.0, 90.0}) {
        const double phi = phase * std::numbers::pi / 180.0;
        const double closed = std::numbers::pi * sigma * sigma / 2.0 *
                              (1.0 + std::exp(-4.0 * std::numbers::pi * std::numbers::pi * f * f * sigma * sigma) *
                                         std::cos(2.0 * phi));
        for (double o : {0.0, 30.0, 45.0, 90.0, 135.0}) {
            const auto w = rasterize_wavelet({128.0, 128.0, cycles, o, phase}, side, 1.0);
            CHECK(energy(w) == doctest::Approx(closed).epsilon(1e-6));
        }
    }
}

TEST_CASE("odd-phase wavelet is antisymmetric about its centre")
{
    const auto w = rasterize_wavelet({16.0, 16.0, 4.0, 45.0, 90.0}, 32, 1.0);
    double sum = 0.0;
    for (double v : w) {
        sum += v;
    }
    CHECK(std::abs(sum) < 1e-12);
    // Point reflection through (16, 16): pixel (x, y) <-> (31 - x, 31 - y).
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            CHECK(w[y * 32 + x] == doctest::Approx(-w[(31 - y) * 32 + (31 - x)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("ridge encoding matches the augmented least-squares oracle on an 8x8 bank")
{
    auto bank = std::make_shared<const GaborBank>(tiny_spec());
    REQUIRE(bank->size() == 40);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> px(64);
    for (double& v : px) {
        v = u(rng);
    }
    const WorkingImage im(8, px);
    for (double lambda : {RidgeEncoder::default_lambda(*bank), 1e-3, 1.0}) {
        const RidgeEncoder enc(bank, lambda);
        const std::vector<double> offset(64, 0.5);
        const WeightVector w = enc.encode(im, offset);
        Eigen::VectorXd x(64);
        for (int i = 0; i < 64; ++i) {
            x[i] = px[i] - 0.5;
        }
        const Eigen::VectorXd oracle = ridge_oracle(bank->basis(), x, lambda);
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            CHECK(std::abs(w[j] - oracle[j]) < 1e-6);
        }
    }
}

TEST_CASE("default lambda is 1e-4 of the mean Gram diagonal")
{
    const GaborBank bank(tiny_spec());
    const Eigen::MatrixXd gram = bank.basis().transpose() * bank.basis();
    CHECK(RidgeEncoder::default_lambda(bank) == doctest::Approx(1e-4 * gram.trace() / 40.0).epsilon(1e-12));
}

TEST_CASE("in-span images survive encode then render")
{
    const GaborBank bank(fixtures::small_spec());
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 0.02);
    WeightVector w0(static_cast<Eigen::Index>(bank.size()));
    for (Eigen::Index j = 0; j < w0.size(); ++j) {
        w0[j] = n(rng);
    }
    const WorkingImage x = render(bank, w0, 0.5);
    const WeightVector w = encode(bank, x, 1e-8, 0.5);
    const WorkingImage back = render(bank, w, 0.5);
    CHECK(pixel_correlation(x, back) > 0.999);

    // Relative pixel residual of the in-span reconstruction.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x.data()[i] - back.data()[i]) * (x.data()[i] - back.data()[i]);
        den += (x.data()[i] - 0.5) * (x.data()[i] - 0.5);
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("encode then render is the identity on weights for a well-conditioned bank at tiny lambda")
{
    const GaborBank bank(tiny_spec());
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    WeightVector w0(40);
    for (Eigen::Index j = 0; j < 40; ++j) {
        w0[j] = n(rng);
    }
    const WeightVector w = encode(bank, render(bank, w0, 0.0), 1e-10, 0.0);
    CHECK((w - w0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("huge penalty drives the weights to zero")
{
    const GaborBank bank(tiny_spec());
    const WorkingImage im = fixtures::held_out_target(1);
    std::vector<double> px(64);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            px[y * 8 + x] = im.at(4 * x, 4 * y);
        }
    }
    const WeightVector w = encode(bank, WorkingImage(8, px), 1e12, 0.5);
    CHECK(w.norm() < 1e-6);
}

TEST_CASE("render is linear in the weights and returns the offset for zero weights")
{
    const GaborBank bank(tiny_spec());
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0.0, 1.0);
    WeightVector a(40), b(40);
    for (Eigen::Index j = 0; j < 40; ++j) {
        a[j] = n(rng);
        b[j] = n(rng);
    }
    const double alpha = 0.7, beta = -1.3;
    const WorkingImage lhs = render(bank, alpha * a + beta * b, 0.0);
    const WorkingImage ra = render(bank, a, 0.0), rb = render(bank, b, 0.0);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        CHECK(std::abs(lhs.data()[i] - (alpha * ra.data()[i] + beta * rb.data()[i])) < 1e-10);
    }
    const WorkingImage flat = render(bank, WeightVector::Zero(40), 0.25);
    for (double v : flat.data()) {
        CHECK(v == 0.25);
    }
}

TEST_CASE("default penalty costs almost nothing against the unregularized projection")
{
    auto bank = std::make_shared<const GaborBank>(fixtures::small_spec());
    const WorkingImage im = fixtures::held_out_target(0);
    const std::vector<double> offset(im.size(), im.mean());
    const RidgeEncoder ridge(bank, RidgeEncoder::default_lambda(*bank));
    const RidgeEncoder plain(bank, 0.0);
    const double r_ridge = pixel_correlation(im, render(*bank, ridge.encode(im, offset), offset));
    const double r_plain = pixel_correlation(im, render(*bank, plain.encode(im, offset), offset));
    CHECK(r_plain > 0.95);
    CHECK(r_ridge > r_plain - 0.01);
}
