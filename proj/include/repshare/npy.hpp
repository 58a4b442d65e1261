#pragma once

#include "repshare/tensor.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace repshare {

// NPY v1.0 subset: little-endian float32, C order, rank >= 1, every dimension
// positive, preamble padded with spaces to a multiple of 64 bytes and
// terminated by '\n'.

/// Serializes to the exact NPY byte layout. Throws FormatError for scalars,
/// zero-sized dimensions or non-finite elements.
std::string encode_npy(const Tensor& t);

/// Parses NPY bytes. FormatError on malformed magic/header/payload or
/// non-finite values, UnsupportedDtype for anything but '<f4',
/// UnsupportedLayout when fortran_order is True.
/// `context` (typically the file name) prefixes error messages.
Tensor decode_npy(std::string_view bytes, const std::string& context = {});

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

/// Shape from the header only; the payload is not read.
Shape read_npy_shape(const std::filesystem::path& path);

}  // namespace repshare
