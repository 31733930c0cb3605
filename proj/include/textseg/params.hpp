// Named trainable parameters with gradient and optimizer slots.

#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "textseg/rng.hpp"
#include "textseg/tensor.hpp"

namespace textseg {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;    // accumulated across a batch; zeroed by the optimizer step
    Tensor adam_m;  // first/second moment state, lazily sized by the optimizer
    Tensor adam_v;
};

class ParamStore {
public:
    Param& add(const std::string& name, std::vector<int> shape);
    Param& get(const std::string& name);
    const Param& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    void zero_grads();
    size_t size() const { return params_.size(); }
    size_t total_elements() const;

    // Registration order, which is also the serialization order.
    std::deque<Param>& all() { return params_; }
    const std::deque<Param>& all() const { return params_; }

    // Raw value blob (names + shapes + doubles), used by the checkpoint format.
    void serialize_values(std::ostream& os) const;
    void deserialize_values(std::istream& is);

private:
    std::deque<Param> params_;
    std::unordered_map<std::string, size_t> index_;
};

// Initializers. All deterministic given the rng stream.
void init_xavier_uniform(Param& p, int fan_in, int fan_out, Rng& rng);
void init_normal(Param& p, double stddev, Rng& rng);
void init_constant(Param& p, double v);

}  // namespace textseg
