#pragma once

#include "reveal/corpus.hpp"
#include "reveal/featurespace.hpp"
#include "reveal/gabor.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>

namespace fixtures {

/// 32 px bank with 672 wavelets.
inline reveal::GaborBankSpec small_spec()
{
    reveal::GaborBankSpec spec;
    spec.side = 32;
    spec.scales = {2, 4, 8};
    return spec;
}

/// 60-image synthetic corpus at 32 px.
inline const reveal::Corpus& small_corpus()
{
    static const reveal::Corpus corpus = reveal::synthesize_test_corpus(60, 32, 11);
    return corpus;
}

/// K=30 model of small_corpus(), fitted once per test binary.
inline std::shared_ptr<const reveal::FeatureModel> small_model()
{
    static const auto model =
        std::make_shared<const reveal::FeatureModel>(reveal::FeatureModel::fit(small_corpus(), small_spec(), 30));
    return model;
}

inline reveal::WorkingImage held_out_target(int family = 0)
{
    return reveal::synthesize_scene(family, 32, 11, 5000 + family);
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("reveal-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace fixtures
