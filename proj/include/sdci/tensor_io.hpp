#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sdci/tensor.hpp"

namespace sdci {

// One tensor record: a single JSON header line {"dtype","name","shape"}
// followed immediately by the raw row-major little-endian payload. Records
// concatenate freely within one stream.
struct TensorRecord {
    std::string name;
    std::string dtype; // "f32" | "f64" | "u8"
    Shape shape;
    std::vector<char> payload;

    std::size_t numel() const { return shape_numel(shape); }

    std::span<const float> as_f32() const;
    std::span<const double> as_f64() const;
    std::span<const std::uint8_t> as_u8() const;
};

void write_record(std::ostream& out, const TensorRecord& rec);
void write_f32(std::ostream& out, const std::string& name, const Shape& shape,
               std::span<const float> values);
void write_f64(std::ostream& out, const std::string& name, const Shape& shape,
               std::span<const double> values);
void write_u8(std::ostream& out, const std::string& name, const Shape& shape,
              std::span<const std::uint8_t> values);

// False on clean end-of-stream; IoError on a malformed header or a payload
// shorter than the header promises (the error names the offending tensor).
bool read_record(std::istream& in, TensorRecord& rec);

// Next record, which must carry the expected name.
TensorRecord require_record(std::istream& in, const std::string& expected_name);

} // namespace sdci
