#pragma once

#include <string>

#include "asr/types.h"

namespace asr {

/// Frame-matrix interchange file, shared by features, emissions and
/// transitions. Little-endian layout:
///
///   char[4]  magic "ASRM"
///   uint32   version (1)
///   uint32   rows
///   uint32   cols
///   float32  frame stride in ms (0 when not a time series)
///   float32  rows * cols values, row-major
struct MatrixFile {
  MatrixXf values;
  float stride_ms = 0.0f;
};

void write_matrix_file(const std::string& path, const MatrixFile& file);
MatrixFile read_matrix_file(const std::string& path);

}  // namespace asr
