#pragma once

#include "ppr/common.hpp"
#include "ppr/net.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ppr {

struct NdArray {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;
};

/// Binary container shared by checkpoints, datasets and sample runs.
///
/// Layout (all integers and floats little-endian):
///   "PPRA" | u32 version | u64 meta length | meta JSON bytes
///   | u32 array count | per array: u32 name length, name bytes,
///     u32 rank, u64 dims[rank], f64 values[prod(dims)]
class ArrayFile {
public:
    static constexpr std::uint32_t kVersion = 1;

    nlohmann::json meta = nlohmann::json::object();

    void put(const std::string& name, const Matrix& m);
    void put(const std::string& name, const Vec& v);
    void put(const std::string& name, NdArray a);

    bool has(const std::string& name) const { return arrays_.count(name) != 0; }
    const NdArray& array(const std::string& name) const;
    Matrix matrix(const std::string& name) const;
    Vec vector(const std::string& name) const;
    const std::map<std::string, NdArray>& arrays() const { return arrays_; }

    void write(const std::string& path) const;
    static ArrayFile read(const std::string& path);

private:
    std::map<std::string, NdArray> arrays_;
};

void save_checkpoint(const DenoiserNet& net, const std::string& path);
DenoiserNet load_checkpoint(const std::string& path);

}  // namespace ppr
