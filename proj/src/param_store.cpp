#include "razh/param_store.hpp"

namespace razh {

void ParamStore::add(const std::string& name, Tensor2 value) {
    if (entries_.count(name))
        throw usage_error("ParamStore: duplicate name '" + name + "'");
    Entry e;
    e.grad = Tensor2(value.rows(), value.cols());
    e.m = Tensor2(value.rows(), value.cols());
    e.v = Tensor2(value.rows(), value.cols());
    e.value = std::move(value);
    entries_.emplace(name, std::move(e));
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw usage_error("ParamStore: unknown name '" + name + "'");
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw usage_error("ParamStore: unknown name '" + name + "'");
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) e.grad.fill(0.0);
    grads_live = false;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

} // namespace razh
