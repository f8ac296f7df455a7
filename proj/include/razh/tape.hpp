#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "razh/param_store.hpp"
#include "razh/tensor.hpp"

namespace razh {

class Tape;

/// Handle to a node on a Tape. Cheap to copy, valid for the tape's lifetime.
struct Var {
    int idx = -1;
};

/// Record-and-replay reverse-mode tape. One forward pass records nodes;
/// backward() runs the chain rule once and flushes parameter gradients
/// into the attached ParamStore. A tape is single use.
class Tape {
public:
    explicit Tape(ParamStore* store = nullptr) : store_(store) {}

    Var constant(Tensor2 value);
    /// Leaf tied to a ParamStore entry. Repeated requests for the same name
    /// return the same node, so shared layers accumulate into one gradient.
    Var param(const std::string& name);

    const Tensor2& value(Var v) const { return nodes_[v.idx].value; }
    const Tensor2& grad(Var v) const { return nodes_[v.idx].grad; }

    // Elementwise / structural ops
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scale(Var a, double c);
    Var matmul_op(Var a, Var b);
    Var transpose_op(Var a);
    /// Add a rows x 1 column vector to every column of a.
    Var add_col(Var a, Var col);
    /// Add a 1 x cols row vector to every row of a.
    Var add_row(Var a, Var row);

    // Nonlinearities
    Var tanh_op(Var a);
    Var sigmoid_op(Var a);
    Var softplus(Var a); // log(1 + e^x), stable
    Var logcosh_op(Var a);
    /// log(max(x, floor)); zero gradient below the floor.
    Var log_clamped(Var a, double floor = 1e-12);
    Var softmax_rows_op(Var a);

    // Reductions / reshapes
    Var sum_all(Var a);          // 1x1
    Var mean_cols(Var a);        // rows x 1
    Var gather_cols(Var a, const std::vector<std::size_t>& idx);
    /// Place a's columns at `positions` (in order) in a rows x total matrix;
    /// every other column is `fill` (rows x 1).
    Var scatter_cols(Var a, const std::vector<std::size_t>& positions,
                     Var fill, std::size_t total_cols);
    /// Stack 1 x c rows into an n x c matrix.
    Var concat_rows(const std::vector<Var>& rows);
    /// Column k = mean of a's columns with assignment[j] == k (Lloyd center).
    /// Assignment is fixed data, not differentiated through.
    Var cluster_means(Var a, const std::vector<std::size_t>& assignment, std::size_t k);
    /// Column j = parts.col(assignment[j]) where replaced[assignment[j]],
    /// else base.col(j). Gradients follow the same routing.
    Var mix_cols(Var base, Var parts, const std::vector<std::size_t>& assignment,
                 const std::vector<bool>& replaced);

    /// Reverse sweep from a 1x1 loss node. Flushes parameter gradients
    /// (accumulating) into the store. Throws if called twice.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor2 value;
        Tensor2 grad;
        std::function<void()> back; // empty for leaves
    };

    Var push(Tensor2 value, std::function<void()> back = {});
    Tensor2& g(Var v) { return nodes_[v.idx].grad; }
    const Tensor2& v(Var var) const { return nodes_[var.idx].value; }

    std::vector<Node> nodes_;
    ParamStore* store_;
    std::map<std::string, int> param_nodes_;
    bool consumed_ = false;
};

} // namespace razh
