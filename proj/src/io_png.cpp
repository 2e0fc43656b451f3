#include "medood/io_png.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <stdexcept>

namespace medood {

namespace {
const std::vector<int> kPngParams = {cv::IMWRITE_PNG_COMPRESSION, 3};

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}
}  // namespace

void write_png_rgb(const std::filesystem::path& path, const ImageU8& img) {
    if (img.c != 3) throw std::invalid_argument("write_png_rgb expects 3 channels");
    ensure_parent(path);
    cv::Mat mat(img.h, img.w, CV_8UC3);
    // OpenCV stores BGR; swap so bytes on disk are true RGB.
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            auto& px = mat.at<cv::Vec3b>(y, x);
            px[0] = img.at(y, x, 2);
            px[1] = img.at(y, x, 1);
            px[2] = img.at(y, x, 0);
        }
    }
    if (!cv::imwrite(path.string(), mat, kPngParams))
        throw std::runtime_error("failed to write " + path.string());
}

void write_png_gray(const std::filesystem::path& path, const LabelMap& lm) {
    ensure_parent(path);
    cv::Mat mat(lm.h, lm.w, CV_8UC1);
    for (int y = 0; y < lm.h; ++y)
        for (int x = 0; x < lm.w; ++x) mat.at<std::uint8_t>(y, x) = lm.at(y, x);
    if (!cv::imwrite(path.string(), mat, kPngParams))
        throw std::runtime_error("failed to write " + path.string());
}

ImageU8 read_png_rgb(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw std::runtime_error("failed to read " + path.string());
    ImageU8 img(mat.rows, mat.cols, 3);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            const auto& px = mat.at<cv::Vec3b>(y, x);
            img.at(y, x, 0) = px[2];
            img.at(y, x, 1) = px[1];
            img.at(y, x, 2) = px[0];
        }
    }
    return img;
}

LabelMap read_png_gray(const std::filesystem::path& path) {
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (mat.empty()) throw std::runtime_error("failed to read " + path.string());
    LabelMap lm(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y)
        for (int x = 0; x < mat.cols; ++x) lm.at(y, x) = mat.at<std::uint8_t>(y, x);
    return lm;
}

}  // namespace medood
