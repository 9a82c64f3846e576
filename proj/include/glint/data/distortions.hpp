#pragma once

// Parameterized synthetic distortions at five severity levels. Families are
// grouped (blur / noise / compression / quantization / color / luminance /
// spatial) and each family's per-level parameters come from distortions.toml
// or the built-in table, which mirrors that file.

#include <map>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <random>
#include <string>
#include <vector>

#include "glint/core/error.hpp"
#include "glint/data/image.hpp"
#include "glint/io/toml_min.hpp"

namespace glint {

struct DistortionFamily {
    std::string name;
    std::string group;
    std::string param_name;
    std::vector<double> levels;  // severity parameter per level 1..5
};

struct DistortionSpec {
    std::string family;
    int level = 1;  // 1..5
    double param = 0.0;
    std::uint64_t seed = 0;
};

struct DegradedImage {
    ImageTensor data;
    std::string source_id;
    DistortionSpec spec;
    std::vector<unsigned char> codec_bytes;  // populated by codec families
};

// KADID-style family names that the bank recognises but does not implement
inline const std::vector<std::string>& stub_families() {
    static const std::vector<std::string> names = {
        "color_diffusion", "color_shift",  "color_block",
        "jpeg2000",        "jitter",       "non_eccentricity_patch",
        "mean_shift",      "high_sharpen", "denoise",
        "quantization_dither"};
    return names;
}

class DistortionBank {
public:
    DistortionBank() { load_builtin(); }
    explicit DistortionBank(const std::string& toml_path) {
        auto doc = toml::parse_file(toml_path);
        for (const auto& [name, table] : doc) {
            DistortionFamily fam;
            fam.name = name;
            fam.group = table.at("group").str;
            for (const auto& [key, val] : table) {
                if (val.kind == toml::Value::Kind::Array) {
                    fam.param_name = key;
                    fam.levels = val.arr;
                }
            }
            if (fam.levels.size() != 5)
                throw ConfigError("family " + name + " must list 5 levels");
            families_[name] = fam;
        }
    }

    std::vector<std::string> family_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : families_) out.push_back(k);
        return out;
    }
    bool implemented(const std::string& name) const {
        return families_.count(name) != 0;
    }
    const DistortionFamily& family(const std::string& name) const {
        auto it = families_.find(name);
        if (it == families_.end()) throw_unavailable(name);
        return it->second;
    }

    DistortionSpec spec(const std::string& family_name, int level,
                        std::uint64_t seed = 0) const {
        if (level < 1 || level > 5)
            throw ConfigError("level must be in 1..5, got " + std::to_string(level));
        const auto& fam = family(family_name);
        return DistortionSpec{family_name, level,
                              fam.levels[static_cast<std::size_t>(level - 1)],
                              seed};
    }

    // cartesian family x level grid
    std::vector<DistortionSpec> enumerate_specs(
        const std::vector<std::string>& fams, int level_lo, int level_hi,
        std::uint64_t seed = 0) const {
        if (fams.empty()) throw ConfigError("enumerate_specs: no families given");
        std::vector<DistortionSpec> out;
        for (const auto& f : fams)
            for (int l = level_lo; l <= level_hi; ++l)
                out.push_back(spec(f, l, seed));
        return out;
    }

    DegradedImage apply(const ImageTensor& x, const DistortionSpec& s,
                        const std::string& source_id = "") const {
        if (!families_.count(s.family)) throw_unavailable(s.family);
        DegradedImage out;
        out.source_id = source_id;
        out.spec = s;
        const double p = s.param;
        if (s.family == "gaussian_blur") {
            out.data = filter(x, gaussian_kernel(p));
        } else if (s.family == "lens_blur") {
            out.data = filter(x, disk_kernel(static_cast<int>(p)));
        } else if (s.family == "motion_blur") {
            out.data = filter(x, motion_kernel(static_cast<int>(p)));
        } else if (s.family == "white_noise") {
            out.data = add_gaussian_noise(x, p, s.seed);
        } else if (s.family == "impulse_noise") {
            out.data = add_impulse_noise(x, p, s.seed);
        } else if (s.family == "multiplicative_noise") {
            out.data = add_speckle_noise(x, p, s.seed);
        } else if (s.family == "jpeg") {
            out.data = jpeg_roundtrip(x, static_cast<int>(p), &out.codec_bytes);
        } else if (s.family == "pixelate") {
            out.data = pixelate(x, static_cast<int>(p));
        } else if (s.family == "color_quantization") {
            out.data = quantize(x, static_cast<int>(p));
        } else if (s.family == "color_saturation") {
            out.data = scale_saturation(x, p);
        } else if (s.family == "brighten") {
            out.data = shift_luminance(x, p);
        } else if (s.family == "darken") {
            out.data = shift_luminance(x, -p);
        } else if (s.family == "contrast_decrease") {
            out.data = scale_contrast(x, p);
        } else {
            throw_unavailable(s.family);
        }
        clip01(out.data);
        return out;
    }

private:
    [[noreturn]] void throw_unavailable(const std::string& name) const {
        std::string msg = "distortion family '" + name + "' not implemented; available:";
        for (const auto& [k, v] : families_) msg += " " + k;
        throw CapabilityError(msg);
    }

    void load_builtin() {
        auto def = [&](const std::string& n, const std::string& g,
                       const std::string& pn, std::vector<double> lv) {
            families_[n] = DistortionFamily{n, g, pn, std::move(lv)};
        };
        def("gaussian_blur", "blur", "sigma", {0.8, 1.6, 3.0, 5.0, 8.0});
        def("lens_blur", "blur", "radius", {1, 2, 3, 5, 8});
        def("motion_blur", "blur", "length", {3, 5, 9, 15, 21});
        def("white_noise", "noise", "sigma", {0.01, 0.03, 0.06, 0.10, 0.16});
        def("impulse_noise", "noise", "prob", {0.005, 0.02, 0.05, 0.10, 0.20});
        def("multiplicative_noise", "noise", "sigma",
            {0.05, 0.09, 0.13, 0.20, 0.30});
        def("jpeg", "compression", "quality", {43, 25, 15, 10, 7});
        def("pixelate", "spatial", "block", {2, 4, 8, 12, 16});
        def("color_quantization", "quantization", "levels", {48, 32, 16, 8, 4});
        def("color_saturation", "color", "scale", {0.7, 0.5, 0.35, 0.2, 0.1});
        def("brighten", "luminance", "shift", {0.05, 0.1, 0.2, 0.3, 0.4});
        def("darken", "luminance", "shift", {0.05, 0.1, 0.2, 0.3, 0.4});
        def("contrast_decrease", "luminance", "factor",
            {0.85, 0.7, 0.55, 0.4, 0.25});
    }

    // ---- kernels ----
    static cv::Mat gaussian_kernel(double sigma) {
        int k = std::max(3, 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1);
        cv::Mat g1 = cv::getGaussianKernel(k, sigma, CV_64F);
        return g1 * g1.t();
    }
    static cv::Mat disk_kernel(int radius) {
        int k = 2 * radius + 1;
        cv::Mat m = cv::Mat::zeros(k, k, CV_64F);
        double sum = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                double dy = i - radius, dx = j - radius;
                if (dy * dy + dx * dx <= radius * radius + 0.25) {
                    m.at<double>(i, j) = 1.0;
                    sum += 1.0;
                }
            }
        return m / sum;
    }
    static cv::Mat motion_kernel(int length) {
        // diagonal streak
        cv::Mat m = cv::Mat::zeros(length, length, CV_64F);
        for (int i = 0; i < length; ++i) m.at<double>(i, i) = 1.0 / length;
        return m;
    }

    static ImageTensor filter(const ImageTensor& x, const cv::Mat& kernel) {
        cv::Mat img = to_cv(x), out;
        cv::filter2D(img, out, -1, kernel, cv::Point(-1, -1), 0,
                     cv::BORDER_REFLECT);
        return from_cv(out);
    }

    // ---- stochastic families (deterministic per seed) ----
    static ImageTensor add_gaussian_noise(const ImageTensor& x, double sigma,
                                          std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> d(0.0, sigma);
        ImageTensor out = x;
        for (Eigen::Index j = 0; j < out.data.cols(); ++j)
            for (Eigen::Index c = 0; c < 3; ++c) out.data(c, j) += d(rng);
        return out;
    }
    static ImageTensor add_impulse_noise(const ImageTensor& x, double prob,
                                         std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ImageTensor out = x;
        for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
            double r = u(rng);
            double salt = u(rng);
            if (r < prob) {
                double v = salt < 0.5 ? 0.0 : 1.0;
                for (Eigen::Index c = 0; c < 3; ++c) out.data(c, j) = v;
            }
        }
        return out;
    }
    static ImageTensor add_speckle_noise(const ImageTensor& x, double sigma,
                                         std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> d(0.0, sigma);
        ImageTensor out = x;
        for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
            double n = d(rng);
            for (Eigen::Index c = 0; c < 3; ++c)
                out.data(c, j) *= (1.0 + n);
        }
        return out;
    }

    static ImageTensor jpeg_roundtrip(const ImageTensor& x, int quality,
                                      std::vector<unsigned char>* bytes) {
        std::vector<unsigned char> buf;
        cv::imencode(".jpg", to_cv8u(x), buf,
                     {cv::IMWRITE_JPEG_QUALITY, quality});
        cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
        if (dec.empty()) throw NumericError("jpeg round-trip failed to decode");
        if (bytes) *bytes = std::move(buf);
        return from_cv(dec);
    }

    static ImageTensor pixelate(const ImageTensor& x, int block) {
        cv::Mat img = to_cv(x), small, out;
        cv::resize(img, small,
                   cv::Size(std::max(1, x.w / block), std::max(1, x.h / block)),
                   0, 0, cv::INTER_AREA);
        cv::resize(small, out, cv::Size(x.w, x.h), 0, 0, cv::INTER_NEAREST);
        return from_cv(out);
    }

    static ImageTensor quantize(const ImageTensor& x, int levels) {
        ImageTensor out = x;
        const double q = levels - 1;
        out.data = ((out.data.array() * q).round() / q).matrix();
        return out;
    }

    static ImageTensor scale_saturation(const ImageTensor& x, double scale) {
        ImageTensor out = x;
        for (Eigen::Index j = 0; j < out.data.cols(); ++j) {
            double r = out.data(0, j), g = out.data(1, j), b = out.data(2, j);
            double y = 0.299 * r + 0.587 * g + 0.114 * b;
            out.data(0, j) = y + scale * (r - y);
            out.data(1, j) = y + scale * (g - y);
            out.data(2, j) = y + scale * (b - y);
        }
        return out;
    }

    static ImageTensor shift_luminance(const ImageTensor& x, double shift) {
        ImageTensor out = x;
        out.data.array() += shift;
        return out;
    }

    static ImageTensor scale_contrast(const ImageTensor& x, double factor) {
        ImageTensor out = x;
        double mean = out.data.mean();
        out.data = ((out.data.array() - mean) * factor + mean).matrix();
        return out;
    }

    std::map<std::string, DistortionFamily> families_;
};

}  // namespace glint
