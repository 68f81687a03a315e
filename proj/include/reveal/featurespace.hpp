#pragma once

#include "reveal/corpus.hpp"
#include "reveal/gabor.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

namespace reveal {

using ScoreVector = Eigen::VectorXd;

/// Per-component spread of corpus scores.
struct ScoreStats {
    Eigen::VectorXd std; // sample std (N - 1 denominator)
    Eigen::VectorXd min;
    Eigen::VectorXd max;
};

/// Generative model of the noise space: Gabor bank + PCA over corpus weights.
///
/// Immutable after construction and cheap to copy (shared state); safe to use
/// from many threads.
class FeatureModel {
public:
    /// Encodes every corpus image, centres the weight matrix and keeps the top
    /// `k` principal directions. `lambda` defaults to RidgeEncoder::default_lambda.
    static FeatureModel fit(const Corpus& corpus, const GaborBankSpec& spec, int k,
                            std::optional<double> lambda = std::nullopt);

    static FeatureModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const GaborBank& bank() const noexcept;
    const RidgeEncoder& encoder() const noexcept;
    const WorkingImage& mean_image() const noexcept;
    const Eigen::VectorXd& weight_mean() const noexcept;
    /// wavelets x K, orthonormal columns by decreasing variance.
    const Eigen::MatrixXd& components() const noexcept;
    /// Corpus score variance per component (= covariance eigenvalues).
    const Eigen::VectorXd& explained_variance() const noexcept;
    double total_variance() const noexcept;
    const ScoreStats& score_stats() const noexcept;
    int k() const noexcept;
    int side() const noexcept;
    std::size_t corpus_size() const noexcept;
    /// SHA-256 of the serialized model.
    const std::string& id() const noexcept;

    ScoreVector project(const WorkingImage& image) const;
    WeightVector weights_for(const ScoreVector& scores) const;
    WorkingImage reconstruct(const ScoreVector& scores) const;
    /// Hot path: pixels = offset + (G C) scores.
    void reconstruct_into(std::span<const double> scores, std::span<double> pixels) const;
    /// reconstruct(project(image)): the K-component version of an image.
    WorkingImage truncate(const WorkingImage& image) const;

private:
    struct State;
    explicit FeatureModel(std::shared_ptr<const State> state) : state_(std::move(state)) {}
    static std::shared_ptr<State> finalize(std::shared_ptr<State> state);
    std::shared_ptr<const State> state_;
};

} // namespace reveal
