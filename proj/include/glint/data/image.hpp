#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <string>

#include "glint/core/autograd.hpp"
#include "glint/core/error.hpp"

namespace glint {

// Decoded RGB image: (3, h*w) row-major doubles in [0,1], channel order R,G,B.
struct ImageTensor {
    int h = 0, w = 0;
    ag::Mat data;  // (3, h*w)

    bool valid() const {
        return h > 0 && w > 0 && data.rows() == 3 &&
               data.cols() == static_cast<Eigen::Index>(h) * w &&
               data.allFinite();
    }
};

inline ImageTensor from_cv(const cv::Mat& bgr) {
    cv::Mat img;
    if (bgr.type() == CV_8UC3)
        bgr.convertTo(img, CV_64FC3, 1.0 / 255.0);
    else if (bgr.type() == CV_64FC3)
        img = bgr;
    else if (bgr.type() == CV_32FC3)
        bgr.convertTo(img, CV_64FC3);
    else
        throw InputError("from_cv: expected 3-channel image");
    ImageTensor t;
    t.h = img.rows;
    t.w = img.cols;
    t.data.resize(3, static_cast<Eigen::Index>(t.h) * t.w);
    for (int i = 0; i < t.h; ++i) {
        const cv::Vec3d* row = img.ptr<cv::Vec3d>(i);
        for (int j = 0; j < t.w; ++j) {
            Eigen::Index idx = static_cast<Eigen::Index>(i) * t.w + j;
            t.data(0, idx) = row[j][2];  // BGR -> RGB
            t.data(1, idx) = row[j][1];
            t.data(2, idx) = row[j][0];
        }
    }
    return t;
}

inline cv::Mat to_cv(const ImageTensor& t) {
    cv::Mat img(t.h, t.w, CV_64FC3);
    for (int i = 0; i < t.h; ++i) {
        cv::Vec3d* row = img.ptr<cv::Vec3d>(i);
        for (int j = 0; j < t.w; ++j) {
            Eigen::Index idx = static_cast<Eigen::Index>(i) * t.w + j;
            row[j] = cv::Vec3d(t.data(2, idx), t.data(1, idx), t.data(0, idx));
        }
    }
    return img;
}

inline cv::Mat to_cv8u(const ImageTensor& t) {
    cv::Mat img = to_cv(t), out;
    img.convertTo(out, CV_8UC3, 255.0);
    return out;
}

inline ImageTensor load_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read image " + path);
    return from_cv(bgr);
}

inline void save_png(const ImageTensor& t, const std::string& path) {
    if (!cv::imwrite(path, to_cv8u(t)))
        throw IoError("cannot write image " + path);
}

inline ImageTensor resize(const ImageTensor& t, int h, int w) {
    cv::Mat img = to_cv(t), out;
    cv::resize(img, out, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    return from_cv(out);
}

inline void clip01(ImageTensor& t) {
    t.data = t.data.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace glint
