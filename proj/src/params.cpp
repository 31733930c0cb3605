#include "textseg/params.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

#include "textseg/error.hpp"

namespace textseg {

Param& ParamStore::add(const std::string& name, std::vector<int> shape) {
    if (has(name)) throw ValueError("duplicate parameter name: " + name);
    params_.push_back(Param{name, Tensor(shape), Tensor(shape), Tensor(), Tensor()});
    index_[name] = params_.size() - 1;
    return params_.back();
}

Param& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter: " + name);
    return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter: " + name);
    return params_[it->second];
}

void ParamStore::zero_grads() {
    for (auto& p : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

size_t ParamStore::total_elements() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.data.size();
    return n;
}

namespace {
template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated parameter stream");
    return v;
}
}  // namespace

void ParamStore::serialize_values(std::ostream& os) const {
    write_pod<uint32_t>(os, static_cast<uint32_t>(params_.size()));
    for (const auto& p : params_) {
        write_pod<uint16_t>(os, static_cast<uint16_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod<uint8_t>(os, static_cast<uint8_t>(p.value.shape.size()));
        for (int d : p.value.shape) write_pod<int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(p.value.data.data()),
                 static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
    }
}

void ParamStore::deserialize_values(std::istream& is) {
    uint32_t n = read_pod<uint32_t>(is);
    if (n != params_.size()) throw IoError("parameter count mismatch in checkpoint");
    for (auto& p : params_) {
        uint16_t len = read_pod<uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (name != p.name) throw IoError("parameter name mismatch: expected " + p.name + " got " + name);
        uint8_t nd = read_pod<uint8_t>(is);
        std::vector<int> shape(nd);
        for (auto& d : shape) d = read_pod<int32_t>(is);
        if (shape != p.value.shape) throw IoError("parameter shape mismatch for " + p.name);
        is.read(reinterpret_cast<char*>(p.value.data.data()),
                static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
        if (!is) throw IoError("truncated parameter stream at " + p.name);
    }
}

void init_xavier_uniform(Param& p, int fan_in, int fan_out, Rng& rng) {
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : p.value.data) v = rng.uniform(-limit, limit);
}

void init_normal(Param& p, double stddev, Rng& rng) {
    for (auto& v : p.value.data) v = stddev * rng.normal();
}

void init_constant(Param& p, double v) {
    std::fill(p.value.data.begin(), p.value.data.end(), v);
}

}  // namespace textseg
