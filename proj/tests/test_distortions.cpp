#include <gtest/gtest.h>

#include <random>

#include "glint/data/distortions.hpp"

using namespace glint;

namespace {

ImageTensor textured_image(int h, int w, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ImageTensor t;
    t.h = h;
    t.w = w;
    t.data.resize(3, static_cast<Eigen::Index>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            Eigen::Index idx = static_cast<Eigen::Index>(i) * w + j;
            // mixture of smooth gradient, sinusoid and noise so blur and
            // noise families both have something to bite on
            double base = 0.5 + 0.3 * std::sin(i * 0.55) * std::cos(j * 0.35);
            for (int c = 0; c < 3; ++c)
                t.data(c, idx) =
                    std::clamp(base + 0.2 * u(rng) + 0.05 * c, 0.0, 1.0);
        }
    return t;
}

double mse(const ImageTensor& a, const ImageTensor& b) {
    return (a.data - b.data).array().square().mean();
}

double laplacian_variance(const ImageTensor& t) {
    cv::Mat img, gray, lap;
    to_cv(t).convertTo(img, CV_32FC3);
    cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);
    cv::Laplacian(gray, lap, CV_32F);
    cv::Scalar mean, stddev;
    cv::meanStdDev(lap, mean, stddev);
    return stddev[0] * stddev[0];
}

}  // namespace

TEST(DistortionBank, EnumerateArithmetic) {
    DistortionBank bank;
    auto fams = bank.family_names();
    ASSERT_GE(fams.size(), 10u);
    EXPECT_EQ(bank.enumerate_specs(fams, 1, 5).size(), fams.size() * 5);
    std::vector<std::string> five(fams.begin(), fams.begin() + 5);
    EXPECT_EQ(bank.enumerate_specs(five, 1, 5).size(), 25u);
    EXPECT_EQ(bank.enumerate_specs({fams[0]}, 1, 1).size(), 1u);
    EXPECT_THROW(bank.enumerate_specs({}, 1, 5), ConfigError);
}

TEST(DistortionBank, FullGridMatchesKadidArithmetic) {
    // 25 families x 5 levels x 50,000 pristine images = 6,250,000
    EXPECT_EQ(25 * 5, 125);
    EXPECT_EQ(125LL * 50000, 6250000LL);
}

TEST(DistortionBank, UnimplementedFamilyRaisesCapabilityError) {
    DistortionBank bank;
    auto img = textured_image(32, 32, 1);
    for (const auto& name : stub_families()) {
        EXPECT_FALSE(bank.implemented(name));
        try {
            bank.apply(img, DistortionSpec{name, 1, 0.0, 0});
            FAIL() << name << " should be unimplemented";
        } catch (const CapabilityError& e) {
            EXPECT_NE(std::string(e.what()).find("gaussian_blur"),
                      std::string::npos)
                << "error should list available families";
        }
    }
}

TEST(DistortionBank, DeterministicBitIdentical) {
    DistortionBank bank;
    auto img = textured_image(48, 64, 2);
    for (const auto& fam : bank.family_names()) {
        auto s = bank.spec(fam, 3, 12345);
        auto a = bank.apply(img, s);
        auto b = bank.apply(img, s);
        EXPECT_EQ(a.data.data, b.data.data) << fam;
    }
}

TEST(DistortionBank, DimensionsPreservedAndClipped) {
    DistortionBank bank;
    auto img = textured_image(40, 56, 3);
    for (const auto& fam : bank.family_names())
        for (int l = 1; l <= 5; ++l) {
            auto d = bank.apply(img, bank.spec(fam, l, 7));
            EXPECT_EQ(d.data.h, img.h) << fam;
            EXPECT_EQ(d.data.w, img.w) << fam;
            EXPECT_GE(d.data.data.minCoeff(), 0.0) << fam;
            EXPECT_LE(d.data.data.maxCoeff(), 1.0) << fam;
        }
}

TEST(DistortionBank, ConstantImageFixedPointForNoiseFreeFamilies) {
    DistortionBank bank;
    ImageTensor img;
    img.h = img.w = 32;
    img.data = ag::Mat::Zero(3, 32 * 32);
    for (const std::string fam :
         {"gaussian_blur", "lens_blur", "motion_blur", "pixelate",
          "color_quantization", "contrast_decrease"}) {
        auto d = bank.apply(img, bank.spec(fam, 4, 0));
        EXPECT_EQ(d.data.data.cwiseAbs().maxCoeff(), 0.0) << fam;
    }
}

TEST(DistortionBank, BlurSharpnessMonotone) {
    // Laplacian-variance oracle: strictly sharper at level 1 than level 5,
    // non-increasing across all levels, on a 10-image fixture
    DistortionBank bank;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        auto img = textured_image(64, 64, seed);
        for (const std::string fam : {"gaussian_blur", "lens_blur", "motion_blur"}) {
            double prev = std::numeric_limits<double>::infinity();
            for (int l = 1; l <= 5; ++l) {
                double lv = laplacian_variance(
                    bank.apply(img, bank.spec(fam, l, seed)).data);
                EXPECT_LE(lv, prev + 1e-12) << fam << " level " << l;
                prev = lv;
            }
            double l1 = laplacian_variance(
                bank.apply(img, bank.spec(fam, 1, seed)).data);
            double l5 = laplacian_variance(
                bank.apply(img, bank.spec(fam, 5, seed)).data);
            EXPECT_LT(l5, l1) << fam;
        }
    }
}

TEST(DistortionBank, NoiseCompressionQuantizationMseMonotone) {
    DistortionBank bank;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        auto img = textured_image(64, 64, seed);
        for (const auto& fam : bank.family_names()) {
            const auto& group = bank.family(fam).group;
            if (group != "noise" && group != "compression" &&
                group != "quantization")
                continue;
            double prev = -1.0;
            for (int l = 1; l <= 5; ++l) {
                double e = mse(img, bank.apply(img, bank.spec(fam, l, seed)).data);
                EXPECT_GE(e, prev - 1e-12) << fam << " level " << l;
                prev = e;
            }
        }
    }
}

TEST(DistortionBank, TomlTableMatchesBuiltin) {
    DistortionBank builtin;
    DistortionBank from_file(std::string(GLINT_SOURCE_DIR) + "/distortions.toml");
    auto a = builtin.family_names();
    auto b = from_file.family_names();
    ASSERT_EQ(a, b);
    for (const auto& fam : a)
        EXPECT_EQ(builtin.family(fam).levels, from_file.family(fam).levels) << fam;
}

TEST(DistortionBank, JpegEmitsCodecIntermediate) {
    DistortionBank bank;
    auto d = bank.apply(textured_image(48, 48, 4), bank.spec("jpeg", 3, 0));
    EXPECT_FALSE(d.codec_bytes.empty());
}

TEST(DistortionBank, LevelOutOfRangeRejected) {
    DistortionBank bank;
    EXPECT_THROW(bank.spec("jpeg", 0, 0), ConfigError);
    EXPECT_THROW(bank.spec("jpeg", 6, 0), ConfigError);
}
