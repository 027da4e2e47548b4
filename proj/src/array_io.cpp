#include "ppr/array_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace ppr {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'R', 'A'};

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

template <class T>
void put_raw(std::ostream& out, T v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <class T>
    T get() {
        T v;
        bytes(reinterpret_cast<char*>(&v), sizeof(T));
        return to_le(v);
    }

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, std::streamsize(n));
        if (std::size_t(in_.gcount()) != n) throw FormatError("array file truncated");
    }

private:
    std::istream& in_;
};

}  // namespace

void ArrayFile::put(const std::string& name, const Matrix& m) {
    NdArray a;
    a.shape = {std::uint64_t(m.rows()), std::uint64_t(m.cols())};
    a.data.assign(m.data(), m.data() + m.size());
    arrays_[name] = std::move(a);
}

void ArrayFile::put(const std::string& name, const Vec& v) {
    NdArray a;
    a.shape = {std::uint64_t(v.size())};
    a.data.assign(v.data(), v.data() + v.size());
    arrays_[name] = std::move(a);
}

void ArrayFile::put(const std::string& name, NdArray a) {
    std::uint64_t n = 1;
    for (auto d : a.shape) n *= d;
    if (n != a.data.size()) throw InputError("array '" + name + "': shape does not match data");
    arrays_[name] = std::move(a);
}

const NdArray& ArrayFile::array(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw FormatError("array '" + name + "' missing");
    return it->second;
}

Matrix ArrayFile::matrix(const std::string& name) const {
    const NdArray& a = array(name);
    if (a.shape.size() != 2) throw FormatError("array '" + name + "' is not a matrix");
    Matrix m(Eigen::Index(a.shape[0]), Eigen::Index(a.shape[1]));
    if (!a.data.empty()) std::memcpy(m.data(), a.data.data(), a.data.size() * sizeof(double));
    return m;
}

Vec ArrayFile::vector(const std::string& name) const {
    const NdArray& a = array(name);
    if (a.shape.size() != 1) throw FormatError("array '" + name + "' is not a vector");
    Vec v(Eigen::Index(a.shape[0]));
    if (!a.data.empty()) std::memcpy(v.data(), a.data.data(), a.data.size() * sizeof(double));
    return v;
}

void ArrayFile::write(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp + " for writing");
        out.write(kMagic, 4);
        put_raw<std::uint32_t>(out, kVersion);
        const std::string m = meta.dump();
        put_raw<std::uint64_t>(out, m.size());
        out.write(m.data(), std::streamsize(m.size()));
        put_raw<std::uint32_t>(out, std::uint32_t(arrays_.size()));
        for (const auto& [name, a] : arrays_) {
            put_raw<std::uint32_t>(out, std::uint32_t(name.size()));
            out.write(name.data(), std::streamsize(name.size()));
            put_raw<std::uint32_t>(out, std::uint32_t(a.shape.size()));
            for (auto d : a.shape) put_raw<std::uint64_t>(out, d);
            for (double x : a.data) put_raw<double>(out, x);
        }
        if (!out) throw Error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

ArrayFile ArrayFile::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    const auto file_size = std::filesystem::file_size(path);
    Reader r(in);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path + ": bad magic");
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const auto meta_len = r.get<std::uint64_t>();
    if (meta_len > file_size) throw FormatError(path + ": truncated metadata");
    std::string meta(meta_len, '\0');
    r.bytes(meta.data(), meta_len);

    ArrayFile f;
    try {
        f.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad metadata: " + e.what());
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = r.get<std::uint32_t>();
        if (name_len > file_size) throw FormatError(path + ": truncated array name");
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);
        NdArray a;
        const auto rank = r.get<std::uint32_t>();
        if (rank > 16) throw FormatError(path + ": implausible rank");
        std::uint64_t n = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            a.shape.push_back(r.get<std::uint64_t>());
            n *= a.shape.back();
        }
        if (n * sizeof(double) > file_size) throw FormatError(path + ": truncated array data");
        a.data.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) a.data[i] = r.get<double>();
        f.arrays_[name] = std::move(a);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
    return f;
}

void save_checkpoint(const DenoiserNet& net, const std::string& path) {
    ArrayFile f;
    const NetConfig& c = net.config();
    f.meta = {{"kind", "denoiser_net"},
              {"format_version", 1},
              {"dim", c.dim},
              {"hidden", c.hidden},
              {"activation", to_string(c.activation)},
              {"embed_features", c.embed_features},
              {"sigma_data", c.sigma_data}};
    if (c.gaussian_skip) f.meta["gaussian_skip"] = true;
    f.put("params", net.parameters());
    f.put("embed_freqs", net.embed_frequencies());
    if (const auto& skip = net.gaussian_skip()) {
        f.put("skip_mean", skip->mean);
        f.put("skip_basis", skip->basis);
        f.put("skip_variances", skip->variances);
    }
    f.write(path);
}

DenoiserNet load_checkpoint(const std::string& path) {
    ArrayFile f = ArrayFile::read(path);
    try {
        if (f.meta.at("kind") != "denoiser_net") throw FormatError(path + ": not a denoiser checkpoint");
        if (f.meta.at("format_version") != 1) throw FormatError(path + ": checkpoint version mismatch");
        NetConfig c;
        c.dim = f.meta.at("dim").get<int>();
        c.hidden = f.meta.at("hidden").get<std::vector<int>>();
        c.activation = activation_from_string(f.meta.at("activation").get<std::string>());
        c.embed_features = f.meta.at("embed_features").get<int>();
        c.sigma_data = f.meta.at("sigma_data").get<double>();
        c.gaussian_skip = f.meta.value("gaussian_skip", false);
        DenoiserNet net(c, f.vector("params"), f.vector("embed_freqs"));
        if (f.has("skip_mean"))
            net.set_gaussian_skip({f.vector("skip_mean"), f.matrix("skip_basis"), f.vector("skip_variances")});
        else if (c.gaussian_skip)
            throw FormatError(path + ": gaussian skip arrays missing");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad checkpoint header: " + e.what());
    } catch (const ValidationError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace ppr
