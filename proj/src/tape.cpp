#include "razh/tape.hpp"

#include <cmath>

namespace razh {

Var Tape::push(Tensor2 value, std::function<void()> back) {
    Node n;
    n.grad = Tensor2(value.rows(), value.cols());
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor2 value) { return push(std::move(value)); }

Var Tape::param(const std::string& name) {
    if (!store_) throw usage_error("Tape::param: no ParamStore attached");
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return Var{it->second};
    Var var = push(store_->value(name));
    param_nodes_.emplace(name, var.idx);
    return var;
}

Var Tape::add(Var a, Var b) {
    if (!v(a).same_shape(v(b))) throw config_error("add: shape mismatch");
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v(b)[i];
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, b, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            g(a)[i] += g(r)[i];
            g(b)[i] += g(r)[i];
        }
    };
    return r;
}

Var Tape::sub(Var a, Var b) {
    if (!v(a).same_shape(v(b))) throw config_error("sub: shape mismatch");
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= v(b)[i];
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, b, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            g(a)[i] += g(r)[i];
            g(b)[i] -= g(r)[i];
        }
    };
    return r;
}

Var Tape::hadamard(Var a, Var b) {
    if (!v(a).same_shape(v(b))) throw config_error("hadamard: shape mismatch");
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= v(b)[i];
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, b, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            g(a)[i] += g(r)[i] * v(b)[i];
            g(b)[i] += g(r)[i] * v(a)[i];
        }
    };
    return r;
}

Var Tape::scale(Var a, double c) {
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r, c] {
        for (std::size_t i = 0; i < g(r).size(); ++i) g(a)[i] += c * g(r)[i];
    };
    return r;
}

Var Tape::matmul_op(Var a, Var b) {
    Var r = push(matmul(v(a), v(b)));
    nodes_[r.idx].back = [this, a, b, r] {
        // dA = dR * B^T, dB = A^T * dR
        const Tensor2& dr = g(r);
        const Tensor2& va = v(a);
        const Tensor2& vb = v(b);
        Tensor2& da = g(a);
        Tensor2& db = g(b);
        for (std::size_t i = 0; i < va.rows(); ++i)
            for (std::size_t j = 0; j < vb.cols(); ++j) {
                const double d = dr.at(i, j);
                if (d == 0.0) continue;
                for (std::size_t k = 0; k < va.cols(); ++k) {
                    da.at(i, k) += d * vb.at(k, j);
                    db.at(k, j) += va.at(i, k) * d;
                }
            }
    };
    return r;
}

Var Tape::transpose_op(Var a) {
    Var r = push(transpose(v(a)));
    nodes_[r.idx].back = [this, a, r] {
        const Tensor2& dr = g(r);
        for (std::size_t i = 0; i < dr.rows(); ++i)
            for (std::size_t j = 0; j < dr.cols(); ++j)
                g(a).at(j, i) += dr.at(i, j);
    };
    return r;
}

Var Tape::add_col(Var a, Var col) {
    if (v(col).cols() != 1 || v(col).rows() != v(a).rows())
        throw config_error("add_col: expected rows x 1 vector");
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out.at(i, j) += v(col).at(i, 0);
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, col, r] {
        const Tensor2& dr = g(r);
        for (std::size_t i = 0; i < dr.rows(); ++i)
            for (std::size_t j = 0; j < dr.cols(); ++j) {
                g(a).at(i, j) += dr.at(i, j);
                g(col).at(i, 0) += dr.at(i, j);
            }
    };
    return r;
}

Var Tape::add_row(Var a, Var row) {
    if (v(row).rows() != 1 || v(row).cols() != v(a).cols())
        throw config_error("add_row: expected 1 x cols vector");
    Tensor2 out = v(a);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out.at(i, j) += v(row).at(0, j);
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, row, r] {
        const Tensor2& dr = g(r);
        for (std::size_t i = 0; i < dr.rows(); ++i)
            for (std::size_t j = 0; j < dr.cols(); ++j) {
                g(a).at(i, j) += dr.at(i, j);
                g(row).at(0, j) += dr.at(i, j);
            }
    };
    return r;
}

Var Tape::tanh_op(Var a) {
    Var r = push(tanh_fwd(v(a)));
    nodes_[r.idx].back = [this, a, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            const double y = v(r)[i];
            g(a)[i] += g(r)[i] * (1.0 - y * y);
        }
    };
    return r;
}

Var Tape::sigmoid_op(Var a) {
    Var r = push(sigmoid(v(a)));
    nodes_[r.idx].back = [this, a, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            const double y = v(r)[i];
            g(a)[i] += g(r)[i] * y * (1.0 - y);
        }
    };
    return r;
}

Var Tape::softplus(Var a) {
    Tensor2 out(v(a).rows(), v(a).cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = v(a)[i];
        // max(x,0) + log1p(e^{-|x|})
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
    }
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r] {
        const Tensor2 s = sigmoid(v(a));
        for (std::size_t i = 0; i < g(r).size(); ++i)
            g(a)[i] += g(r)[i] * s[i];
    };
    return r;
}

Var Tape::logcosh_op(Var a) {
    Var r = push(logcosh(v(a)));
    nodes_[r.idx].back = [this, a, r] {
        for (std::size_t i = 0; i < g(r).size(); ++i)
            g(a)[i] += g(r)[i] * std::tanh(v(a)[i]);
    };
    return r;
}

Var Tape::log_clamped(Var a, double floor) {
    Tensor2 out(v(a).rows(), v(a).cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::log(std::max(v(a)[i], floor));
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r, floor] {
        for (std::size_t i = 0; i < g(r).size(); ++i) {
            const double x = v(a)[i];
            if (x > floor) g(a)[i] += g(r)[i] / x;
        }
    };
    return r;
}

Var Tape::softmax_rows_op(Var a) {
    Var r = push(softmax_rows(v(a)));
    nodes_[r.idx].back = [this, a, r] {
        const Tensor2& y = v(r);
        const Tensor2& dr = g(r);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j)
                dot += dr.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j)
                g(a).at(i, j) += y.at(i, j) * (dr.at(i, j) - dot);
        }
    };
    return r;
}

Var Tape::sum_all(Var a) {
    double s = 0.0;
    for (std::size_t i = 0; i < v(a).size(); ++i) s += v(a)[i];
    Var r = push(Tensor2(1, 1, {s}));
    nodes_[r.idx].back = [this, a, r] {
        const double d = g(r)[0];
        for (std::size_t i = 0; i < g(a).size(); ++i) g(a)[i] += d;
    };
    return r;
}

Var Tape::mean_cols(Var a) {
    const std::size_t n = v(a).cols();
    if (n == 0) throw config_error("mean_cols: empty input");
    Tensor2 out(v(a).rows(), 1);
    for (std::size_t i = 0; i < v(a).rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += v(a).at(i, j);
        out.at(i, 0) = s / static_cast<double>(n);
    }
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r, n] {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < g(r).rows(); ++i) {
            const double d = g(r).at(i, 0) * inv;
            for (std::size_t j = 0; j < n; ++j) g(a).at(i, j) += d;
        }
    };
    return r;
}

Var Tape::gather_cols(Var a, const std::vector<std::size_t>& idx) {
    Tensor2 out(v(a).rows(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= v(a).cols()) throw config_error("gather_cols: index out of range");
        for (std::size_t i = 0; i < out.rows(); ++i)
            out.at(i, j) = v(a).at(i, idx[j]);
    }
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r, idx] {
        for (std::size_t j = 0; j < idx.size(); ++j)
            for (std::size_t i = 0; i < g(r).rows(); ++i)
                g(a).at(i, idx[j]) += g(r).at(i, j);
    };
    return r;
}

Var Tape::scatter_cols(Var a, const std::vector<std::size_t>& positions,
                       Var fill, std::size_t total_cols) {
    if (positions.size() != v(a).cols())
        throw config_error("scatter_cols: position count != column count");
    if (v(fill).cols() != 1 || v(fill).rows() != v(a).rows())
        throw config_error("scatter_cols: fill must be rows x 1");
    Tensor2 out(v(a).rows(), total_cols);
    std::vector<int> src(total_cols, -1);
    for (std::size_t j = 0; j < positions.size(); ++j) {
        if (positions[j] >= total_cols)
            throw config_error("scatter_cols: position out of range");
        src[positions[j]] = static_cast<int>(j);
    }
    for (std::size_t j = 0; j < total_cols; ++j)
        for (std::size_t i = 0; i < out.rows(); ++i)
            out.at(i, j) = src[j] >= 0 ? v(a).at(i, static_cast<std::size_t>(src[j]))
                                       : v(fill).at(i, 0);
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, fill, r, src] {
        for (std::size_t j = 0; j < src.size(); ++j)
            for (std::size_t i = 0; i < g(r).rows(); ++i) {
                if (src[j] >= 0)
                    g(a).at(i, static_cast<std::size_t>(src[j])) += g(r).at(i, j);
                else
                    g(fill).at(i, 0) += g(r).at(i, j);
            }
    };
    return r;
}

Var Tape::concat_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw config_error("concat_rows: no rows");
    const std::size_t c = v(rows[0]).cols();
    Tensor2 out(rows.size(), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (v(rows[i]).rows() != 1 || v(rows[i]).cols() != c)
            throw config_error("concat_rows: row shape mismatch");
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = v(rows[i]).at(0, j);
    }
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, rows, r] {
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < g(r).cols(); ++j)
                g(rows[i]).at(0, j) += g(r).at(i, j);
    };
    return r;
}

Var Tape::cluster_means(Var a, const std::vector<std::size_t>& assignment, std::size_t k) {
    if (assignment.size() != v(a).cols())
        throw config_error("cluster_means: assignment length != column count");
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t c : assignment) {
        if (c >= k) throw config_error("cluster_means: assignment out of range");
        ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c] == 0) throw config_error("cluster_means: empty cluster");
    Tensor2 out(v(a).rows(), k);
    for (std::size_t j = 0; j < assignment.size(); ++j)
        for (std::size_t i = 0; i < out.rows(); ++i)
            out.at(i, assignment[j]) += v(a).at(i, j);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < out.rows(); ++i)
            out.at(i, c) /= static_cast<double>(counts[c]);
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, a, r, assignment, counts] {
        for (std::size_t j = 0; j < assignment.size(); ++j) {
            const double inv = 1.0 / static_cast<double>(counts[assignment[j]]);
            for (std::size_t i = 0; i < g(r).rows(); ++i)
                g(a).at(i, j) += g(r).at(i, assignment[j]) * inv;
        }
    };
    return r;
}

Var Tape::mix_cols(Var base, Var parts, const std::vector<std::size_t>& assignment,
                   const std::vector<bool>& replaced) {
    if (assignment.size() != v(base).cols())
        throw config_error("mix_cols: assignment length != column count");
    if (replaced.size() != v(parts).cols())
        throw config_error("mix_cols: replaced flags != part count");
    if (v(base).rows() != v(parts).rows())
        throw config_error("mix_cols: row dimension mismatch");
    Tensor2 out(v(base).rows(), v(base).cols());
    for (std::size_t j = 0; j < out.cols(); ++j) {
        const std::size_t c = assignment[j];
        if (c >= replaced.size()) throw config_error("mix_cols: assignment out of range");
        for (std::size_t i = 0; i < out.rows(); ++i)
            out.at(i, j) = replaced[c] ? v(parts).at(i, c) : v(base).at(i, j);
    }
    Var r = push(std::move(out));
    nodes_[r.idx].back = [this, base, parts, r, assignment, replaced] {
        for (std::size_t j = 0; j < g(r).cols(); ++j) {
            const std::size_t c = assignment[j];
            for (std::size_t i = 0; i < g(r).rows(); ++i) {
                if (replaced[c]) g(parts).at(i, c) += g(r).at(i, j);
                else g(base).at(i, j) += g(r).at(i, j);
            }
        }
    };
    return r;
}

void Tape::backward(Var loss) {
    if (consumed_)
        throw usage_error("Tape::backward: tape already consumed; build a new tape");
    consumed_ = true;
    if (v(loss).rows() != 1 || v(loss).cols() != 1)
        throw usage_error("Tape::backward: loss must be 1x1");
    g(loss)[0] = 1.0;
    for (int i = loss.idx; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back();
    if (store_) {
        for (const auto& [name, idx] : param_nodes_) {
            Tensor2& acc = store_->grad(name);
            const Tensor2& src = nodes_[idx].grad;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
        }
        store_->grads_live = true;
    }
}

} // namespace razh
