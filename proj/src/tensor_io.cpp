#include "sdci/tensor_io.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are little-endian; this build targets little-endian hosts");

namespace sdci {

namespace {

std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    if (dtype == "u8") return 1;
    throw IoError("unsupported tensor dtype: " + dtype);
}

} // namespace

std::span<const float> TensorRecord::as_f32() const {
    if (dtype != "f32") throw IoError("tensor '" + name + "' is " + dtype + ", expected f32");
    return {reinterpret_cast<const float*>(payload.data()), numel()};
}

std::span<const double> TensorRecord::as_f64() const {
    if (dtype != "f64") throw IoError("tensor '" + name + "' is " + dtype + ", expected f64");
    return {reinterpret_cast<const double*>(payload.data()), numel()};
}

std::span<const std::uint8_t> TensorRecord::as_u8() const {
    if (dtype != "u8") throw IoError("tensor '" + name + "' is " + dtype + ", expected u8");
    return {reinterpret_cast<const std::uint8_t*>(payload.data()), numel()};
}

void write_record(std::ostream& out, const TensorRecord& rec) {
    if (rec.payload.size() != rec.numel() * dtype_size(rec.dtype))
        throw IoError("tensor '" + rec.name + "' payload does not match its shape");
    nlohmann::json header{{"name", rec.name}, {"dtype", rec.dtype}, {"shape", rec.shape}};
    out << header.dump() << '\n';
    out.write(rec.payload.data(), static_cast<std::streamsize>(rec.payload.size()));
    if (!out) throw IoError("write failed for tensor '" + rec.name + "'");
}

namespace {

template <typename T>
void write_typed(std::ostream& out, const std::string& name, const Shape& shape,
                 std::span<const T> values, const char* dtype) {
    TensorRecord rec;
    rec.name = name;
    rec.dtype = dtype;
    rec.shape = shape;
    rec.payload.resize(values.size_bytes());
    std::memcpy(rec.payload.data(), values.data(), values.size_bytes());
    write_record(out, rec);
}

} // namespace

void write_f32(std::ostream& out, const std::string& name, const Shape& shape,
               std::span<const float> values) {
    write_typed(out, name, shape, values, "f32");
}

void write_f64(std::ostream& out, const std::string& name, const Shape& shape,
               std::span<const double> values) {
    write_typed(out, name, shape, values, "f64");
}

void write_u8(std::ostream& out, const std::string& name, const Shape& shape,
              std::span<const std::uint8_t> values) {
    write_typed(out, name, shape, values, "u8");
}

bool read_record(std::istream& in, TensorRecord& rec) {
    std::string line;
    if (!std::getline(in, line)) {
        if (in.eof()) return false;
        throw IoError("tensor stream read failure");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
        rec.name = header.at("name").get<std::string>();
        rec.dtype = header.at("dtype").get<std::string>();
        rec.shape = header.at("shape").get<Shape>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed tensor header: ") + e.what());
    }
    std::size_t bytes = rec.numel() * dtype_size(rec.dtype);
    rec.payload.resize(bytes);
    in.read(rec.payload.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw IoError("tensor '" + rec.name + "' payload truncated: expected " +
                      std::to_string(bytes) + " bytes, got " + std::to_string(in.gcount()));
    return true;
}

TensorRecord require_record(std::istream& in, const std::string& expected_name) {
    TensorRecord rec;
    if (!read_record(in, rec)) throw IoError("missing tensor record '" + expected_name + "'");
    if (rec.name != expected_name)
        throw IoError("expected tensor '" + expected_name + "', found '" + rec.name + "'");
    return rec;
}

} // namespace sdci
