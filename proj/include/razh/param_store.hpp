#pragma once

#include <map>
#include <string>
#include <vector>

#include "razh/tensor.hpp"

namespace razh {

/// Named trainable arrays with gradient accumulators and Adam moment state.
/// Not safe for concurrent mutation.
class ParamStore {
public:
    struct Entry {
        Tensor2 value;
        Tensor2 grad;
        Tensor2 m; // first moment
        Tensor2 v; // second moment
    };

    void add(const std::string& name, Tensor2 value);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Tensor2& value(const std::string& name) { return entry(name).value; }
    const Tensor2& value(const std::string& name) const { return entry(name).value; }
    Tensor2& grad(const std::string& name) { return entry(name).grad; }
    const Tensor2& grad(const std::string& name) const { return entry(name).grad; }
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    void zero_grads();

    std::vector<std::string> names() const;
    std::size_t count() const { return entries_.size(); }

    // Adam timestep, shared across entries.
    long step_count = 0;
    // Set by Tape::backward, cleared by zero_grads/adam_step.
    bool grads_live = false;

private:
    std::map<std::string, Entry> entries_; // ordered: deterministic iteration
};

} // namespace razh
