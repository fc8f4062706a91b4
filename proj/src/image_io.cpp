/*
 * facefit - fitting a blendshape face rig to calibrated image sequences.
 *
 * File: src/image_io.cpp
 *
 * Copyright 2026 The facefit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "facefit/image_io.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

#include "facefit/common.h"

namespace facefit {

namespace {

struct FileCloser
{
    void operator()(std::FILE* f) const
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::string& path)
{
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos)
        return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

Image read_png(const std::string& path)
{
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f)
        throw FaceFitError("cannot open png for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FaceFitError("png read error: " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    const int width = png_get_image_width(png, info);
    const int height = png_get_image_height(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16)
        png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    Image out(height, width, channels >= 3 ? 3 : 1);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < out.channels(); ++c)
                out.at(y, x, c) = row[x * channels + c] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::string& path, const Image& image)
{
    if (image.channels() != 1 && image.channels() != 3)
        throw FaceFitError("png writer supports 1 or 3 channels");
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f)
        throw FaceFitError("cannot open png for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FaceFitError("png write error: " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, image.width(), image.height(), 8,
                 image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(image.width()) * image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c) {
                const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                row[x * image.channels() + c] = static_cast<png_byte>(std::floor(v * 255.0 + 0.5));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_npy(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FaceFitError("cannot open npy for reading: " + path);
    char magic[6];
    f.read(magic, 6);
    if (std::memcmp(magic, "\x93NUMPY", 6) != 0)
        throw FaceFitError("not an npy file: " + path);
    char ver[2];
    f.read(ver, 2);
    uint16_t header_len = 0;
    f.read(reinterpret_cast<char*>(&header_len), 2);
    std::string header(header_len, '\0');
    f.read(header.data(), header_len);
    if (header.find("'<f8'") == std::string::npos || header.find("'fortran_order': False") == std::string::npos)
        throw FaceFitError("npy must be little-endian float64 C-order: " + path);
    const auto sp = header.find("'shape':");
    const auto open = header.find('(', sp);
    const auto close = header.find(')', open);
    std::string shape = header.substr(open + 1, close - open - 1);
    std::replace(shape.begin(), shape.end(), ',', ' ');
    std::istringstream ss(shape);
    std::vector<int> dims;
    int d;
    while (ss >> d)
        dims.push_back(d);
    if (dims.size() == 2)
        dims.push_back(1);
    if (dims.size() != 3)
        throw FaceFitError("npy image must have shape (H, W, C): " + path);
    Image out(dims[0], dims[1], dims[2]);
    f.read(reinterpret_cast<char*>(out.data().data()),
           static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (!f)
        throw FaceFitError("truncated npy: " + path);
    return out;
}

void write_npy(const std::string& path, const Image& image)
{
    std::ostringstream hs;
    hs << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << image.height() << ", "
       << image.width() << ", " << image.channels() << "), }";
    std::string header = hs.str();
    const size_t unpadded = 10 + header.size() + 1;
    const size_t padded = (unpadded + 63) / 64 * 64;
    header.append(padded - 10 - header.size() - 1, ' ');
    header.push_back('\n');
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FaceFitError("cannot open npy for writing: " + path);
    f.write("\x93NUMPY\x01\x00", 8);
    const uint16_t header_len = static_cast<uint16_t>(header.size());
    f.write(reinterpret_cast<const char*>(&header_len), 2);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(image.data().data()),
            static_cast<std::streamsize>(image.size() * sizeof(double)));
    if (!f)
        throw FaceFitError("npy write failed: " + path);
}

Image read_image(const std::string& path)
{
    const std::string ext = lower_ext(path);
    if (ext == "png")
        return read_png(path);
    if (ext == "npy")
        return read_npy(path);
    throw FaceFitError("unsupported image extension: " + path);
}

void write_image(const std::string& path, const Image& image)
{
    const std::string ext = lower_ext(path);
    if (ext == "png")
        write_png(path, image);
    else if (ext == "npy")
        write_npy(path, image);
    else
        throw FaceFitError("unsupported image extension: " + path);
}

} // namespace facefit
