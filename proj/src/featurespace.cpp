#include "reveal/featurespace.hpp"

#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/simd/kernels.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace reveal {
namespace {

constexpr const char* kModelMagic = "RVLMODEL";
constexpr std::uint32_t kModelVersion = 1;

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

} // namespace

struct FeatureModel::State {
    std::shared_ptr<const GaborBank> bank;
    std::unique_ptr<RidgeEncoder> encoder;
    WorkingImage mean_image;
    Eigen::VectorXd weight_mean;
    Eigen::MatrixXd components;
    Eigen::VectorXd explained;
    double total_variance = 0.0;
    ScoreStats stats;
    std::size_t corpus_size = 0;
    double lambda = 0.0;

    // Derived on load/fit.
    Eigen::MatrixXd render_matrix; // pixels x K = G C
    std::vector<double> render_offset; // mean image + G weight_mean
    std::string id;

    io::BinaryWriter serialize() const
    {
        io::BinaryWriter w(kModelMagic, kModelVersion);
        const auto& spec = bank->spec();
        w.u32(static_cast<std::uint32_t>(spec.side));
        w.u64(spec.scales.size());
        for (int s : spec.scales) {
            w.u32(static_cast<std::uint32_t>(s));
        }
        w.f64s(spec.orientations_deg);
        w.f64s(spec.phases_deg);
        w.f64(spec.bandwidth_octaves);
        w.f64(spec.orientation_bandwidth_deg);
        w.f64(lambda);
        w.u64(corpus_size);
        w.u32(static_cast<std::uint32_t>(components.cols()));
        w.f64s(mean_image.data());
        w.f64s(as_span(weight_mean));
        w.f64s({components.data(), static_cast<std::size_t>(components.size())});
        w.f64s(as_span(explained));
        w.f64(total_variance);
        w.f64s(as_span(stats.std));
        w.f64s(as_span(stats.min));
        w.f64s(as_span(stats.max));
        return w;
    }
};

std::shared_ptr<FeatureModel::State> FeatureModel::finalize(std::shared_ptr<State> s)
{
    s->encoder = std::make_unique<RidgeEncoder>(s->bank, s->lambda);
    const auto& g = s->bank->basis();
    s->render_matrix = g * s->components;
    const Eigen::VectorXd base = g * s->weight_mean;
    s->render_offset.assign(s->mean_image.data().begin(), s->mean_image.data().end());
    for (std::size_t i = 0; i < s->render_offset.size(); ++i) {
        s->render_offset[i] += base[static_cast<Eigen::Index>(i)];
    }
    s->id = sha256_hex(s->serialize().bytes());
    return s;
}

FeatureModel FeatureModel::fit(const Corpus& corpus, const GaborBankSpec& spec, int k, std::optional<double> lambda)
{
    require(!corpus.empty(), ErrorCode::NoImages, "cannot fit a model on an empty corpus");
    require(corpus.side() == spec.side, ErrorCode::InvalidInput, "corpus side does not match bank spec");
    const std::size_t n_wavelets = bank_size(spec);
    require(k >= 1 && static_cast<std::size_t>(k) <= std::min(corpus.size(), n_wavelets), ErrorCode::InvalidK,
            "K=" + std::to_string(k) + " exceeds min(corpus size, wavelet count)");

    auto s = std::make_shared<State>();
    s->bank = std::make_shared<const GaborBank>(spec);
    s->lambda = lambda.value_or(RidgeEncoder::default_lambda(*s->bank));
    s->corpus_size = corpus.size();
    s->mean_image = corpus.mean_image();
    const RidgeEncoder encoder(s->bank, s->lambda);

    const auto n = static_cast<Eigen::Index>(corpus.size());
    const auto pixels = static_cast<Eigen::Index>(s->bank->pixels());
    Eigen::MatrixXd centered(pixels, n);
    const Eigen::Map<const Eigen::VectorXd> mean_px(s->mean_image.data().data(), pixels);
    for (Eigen::Index i = 0; i < n; ++i) {
        centered.col(i) = Eigen::Map<const Eigen::VectorXd>(corpus[static_cast<std::size_t>(i)].data().data(), pixels) - mean_px;
    }
    const Eigen::MatrixXd weights = encoder.encode_many(centered); // wavelets x N
    s->weight_mean = weights.rowwise().mean();
    const Eigen::MatrixXd wc = (weights.colwise() - s->weight_mean).transpose(); // N x wavelets

    Eigen::BDCSVD<Eigen::MatrixXd> svd(wc, Eigen::ComputeThinV);
    Eigen::MatrixXd v = svd.matrixV().leftCols(k);
    // Sign convention: largest-magnitude entry of each component is positive.
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index arg = 0;
        v.col(c).cwiseAbs().maxCoeff(&arg);
        if (v(arg, c) < 0.0) {
            v.col(c) = -v.col(c);
        }
    }
    s->components = std::move(v);
    const double dof = n > 1 ? static_cast<double>(n - 1) : 1.0;
    s->explained = svd.singularValues().head(k).array().square() / dof;
    s->total_variance = svd.singularValues().array().square().sum() / dof;

    const Eigen::MatrixXd scores = wc * s->components; // N x K
    s->stats.min = scores.colwise().minCoeff().transpose();
    s->stats.max = scores.colwise().maxCoeff().transpose();
    s->stats.std = (scores.colwise().squaredNorm().transpose() / dof).cwiseSqrt();
    return FeatureModel(finalize(std::move(s)));
}

void FeatureModel::save(const std::filesystem::path& path) const { state_->serialize().save_atomic(path); }

FeatureModel FeatureModel::load(const std::filesystem::path& path)
{
    auto r = io::BinaryReader::open(path, kModelMagic);
    require(r.version() == kModelVersion, ErrorCode::Format, "unsupported model version");
    GaborBankSpec spec;
    spec.side = static_cast<int>(r.u32());
    spec.scales.resize(r.u64());
    for (int& sc : spec.scales) {
        sc = static_cast<int>(r.u32());
    }
    spec.orientations_deg = r.f64s();
    spec.phases_deg = r.f64s();
    spec.bandwidth_octaves = r.f64();
    spec.orientation_bandwidth_deg = r.f64();

    auto s = std::make_shared<State>();
    s->bank = std::make_shared<const GaborBank>(spec);
    s->lambda = r.f64();
    s->corpus_size = r.u64();
    const auto k = static_cast<Eigen::Index>(r.u32());
    const auto nw = static_cast<Eigen::Index>(s->bank->size());
    auto to_vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval(); };
    s->mean_image = WorkingImage(spec.side, r.f64s(), "corpus-mean");
    s->weight_mean = to_vec(r.f64s());
    const auto comps = r.f64s();
    require(static_cast<Eigen::Index>(comps.size()) == nw * k && s->weight_mean.size() == nw, ErrorCode::Format,
            "model matrices do not match bank size");
    s->components = Eigen::Map<const Eigen::MatrixXd>(comps.data(), nw, k);
    s->explained = to_vec(r.f64s());
    s->total_variance = r.f64();
    s->stats.std = to_vec(r.f64s());
    s->stats.min = to_vec(r.f64s());
    s->stats.max = to_vec(r.f64s());
    require(s->explained.size() == k && s->stats.std.size() == k && s->stats.min.size() == k &&
                s->stats.max.size() == k && r.at_end(),
            ErrorCode::Format, "corrupt model file");
    return FeatureModel(finalize(std::move(s)));
}

const GaborBank& FeatureModel::bank() const noexcept { return *state_->bank; }
const RidgeEncoder& FeatureModel::encoder() const noexcept { return *state_->encoder; }
const WorkingImage& FeatureModel::mean_image() const noexcept { return state_->mean_image; }
const Eigen::VectorXd& FeatureModel::weight_mean() const noexcept { return state_->weight_mean; }
const Eigen::MatrixXd& FeatureModel::components() const noexcept { return state_->components; }
const Eigen::VectorXd& FeatureModel::explained_variance() const noexcept { return state_->explained; }
double FeatureModel::total_variance() const noexcept { return state_->total_variance; }
const ScoreStats& FeatureModel::score_stats() const noexcept { return state_->stats; }
int FeatureModel::k() const noexcept { return static_cast<int>(state_->components.cols()); }
int FeatureModel::side() const noexcept { return state_->bank->side(); }
std::size_t FeatureModel::corpus_size() const noexcept { return state_->corpus_size; }
const std::string& FeatureModel::id() const noexcept { return state_->id; }

ScoreVector FeatureModel::project(const WorkingImage& image) const
{
    require(image.side() == side(), ErrorCode::InvalidInput, "image side does not match model");
    const WeightVector w = state_->encoder->encode(image, state_->mean_image.data());
    return state_->components.transpose() * (w - state_->weight_mean);
}

WeightVector FeatureModel::weights_for(const ScoreVector& scores) const
{
    require(scores.size() == k(), ErrorCode::InvalidInput, "score length does not match K");
    return state_->weight_mean + state_->components * scores;
}

void FeatureModel::reconstruct_into(std::span<const double> scores, std::span<double> pixels) const
{
    require(scores.size() == static_cast<std::size_t>(k()), ErrorCode::InvalidInput, "score length does not match K");
    require(std::all_of(scores.begin(), scores.end(), [](double v) { return std::isfinite(v); }),
            ErrorCode::InvalidInput, "non-finite scores");
    const auto& r = state_->render_matrix;
    simd::gemv({r.data(), static_cast<std::size_t>(r.size())}, static_cast<std::size_t>(r.rows()),
               static_cast<std::size_t>(r.cols()), scores, pixels);
    simd::axpy(1.0, state_->render_offset, pixels);
}

WorkingImage FeatureModel::reconstruct(const ScoreVector& scores) const
{
    std::vector<double> px(state_->bank->pixels());
    reconstruct_into({scores.data(), static_cast<std::size_t>(scores.size())}, px);
    return WorkingImage(side(), std::move(px));
}

WorkingImage FeatureModel::truncate(const WorkingImage& image) const { return reconstruct(project(image)); }

} // namespace reveal
