#include "spherelab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spherelab::autodiff {

namespace {

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Constant: return "constant";
        case Op::IntInput: return "int_input";
        case Op::MatMul: return "matmul";
        case Op::Add: return "add";
        case Op::ScalarMul: return "scalar_mul";
        case Op::EwMul: return "ew_mul";
        case Op::Transpose: return "transpose";
        case Op::RowSoftmax: return "row_softmax";
        case Op::RmsNorm: return "rms_norm";
        case Op::LayerNorm: return "layer_norm";
        case Op::Silu: return "silu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::GatherRows: return "gather_rows";
        case Op::TopK: return "topk";
        case Op::ScatterCols: return "scatter_cols";
        case Op::CrossEntropy: return "cross_entropy";
    }
    return "?";
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

void Graph::check(bool ok, const std::string& what) const {
    if (!ok) throw std::invalid_argument("graph node " + std::to_string(nodes_.size()) + ": " + what);
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::input(const std::string& name, int rows, int cols) {
    check(rows > 0 && cols > 0, "input '" + name + "' needs positive shape");
    Node n{Op::Input, name};
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

NodeId Graph::int_input(const std::string& name, int length) {
    check(length > 0, "int_input '" + name + "' needs positive length");
    Node n{Op::IntInput, name};
    n.rows = length;
    n.cols = 1;
    return push(std::move(n));
}

NodeId Graph::constant(Mat m, const std::string& name) {
    check(!m.empty(), "constant '" + name + "' is empty");
    Node n{Op::Constant, name};
    n.rows = m.rows;
    n.cols = m.cols;
    n.payload = std::move(m);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    check(nodes_[a].cols == nodes_[b].rows,
          std::string("matmul inner dims ") + std::to_string(nodes_[a].cols) + " vs " +
              std::to_string(nodes_[b].rows));
    Node n{Op::MatMul};
    n.a = a;
    n.b = b;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[b].cols;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    check(nodes_[a].rows == nodes_[b].rows && nodes_[a].cols == nodes_[b].cols, "add shape mismatch");
    Node n{Op::Add};
    n.a = a;
    n.b = b;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId a, double s) {
    Node n{Op::ScalarMul};
    n.a = a;
    n.scalar = s;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
}

NodeId Graph::ew_mul(NodeId a, NodeId b) {
    const bool same = nodes_[a].rows == nodes_[b].rows && nodes_[a].cols == nodes_[b].cols;
    const bool row_bcast = nodes_[b].rows == 1 && nodes_[b].cols == nodes_[a].cols;
    const bool col_bcast = nodes_[b].cols == 1 && nodes_[b].rows == nodes_[a].rows;
    check(same || row_bcast || col_bcast, "ew_mul shape mismatch (rhs must match, or broadcast as row/col)");
    Node n{Op::EwMul};
    n.a = a;
    n.b = b;
    n.rows = nodes_[a].rows;
    n.cols = nodes_[a].cols;
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n{Op::Transpose};
    n.a = a;
    n.rows = nodes_[a].cols;
    n.cols = nodes_[a].rows;
    return push(std::move(n));
}

#define SPHERELAB_UNARY(method, opcode)            \
    NodeId Graph::method(NodeId a) {               \
        Node n{opcode};                            \
        n.a = a;                                   \
        n.rows = nodes_[a].rows;                   \
        n.cols = nodes_[a].cols;                   \
        return push(std::move(n));                 \
    }

SPHERELAB_UNARY(row_softmax, Op::RowSoftmax)
SPHERELAB_UNARY(rms_norm, Op::RmsNorm)
SPHERELAB_UNARY(layer_norm, Op::LayerNorm)
SPHERELAB_UNARY(silu, Op::Silu)
SPHERELAB_UNARY(sigmoid, Op::Sigmoid)
SPHERELAB_UNARY(exp, Op::Exp)
SPHERELAB_UNARY(log, Op::Log)
#undef SPHERELAB_UNARY

NodeId Graph::gather_rows(NodeId table, NodeId ids) {
    check(nodes_[ids].op == Op::IntInput, "gather_rows: ids must be an int_input");
    Node n{Op::GatherRows};
    n.a = table;
    n.b = ids;
    n.rows = nodes_[ids].rows;
    n.cols = nodes_[table].cols;
    return push(std::move(n));
}

NodeId Graph::topk(NodeId a, int k) {
    check(k >= 1 && k <= nodes_[a].cols,
          "topk: k=" + std::to_string(k) + " out of range for " + std::to_string(nodes_[a].cols) + " columns");
    Node n{Op::TopK};
    n.a = a;
    n.k = k;
    n.rows = nodes_[a].rows;
    n.cols = k;
    return push(std::move(n));
}

NodeId Graph::scatter_cols(NodeId values, NodeId topk_node, int width) {
    check(nodes_[topk_node].op == Op::TopK, "scatter_cols: index source must be a topk node");
    check(nodes_[values].rows == nodes_[topk_node].rows && nodes_[values].cols == nodes_[topk_node].k,
          "scatter_cols: values shape must be (rows x k) of the topk node");
    check(width >= nodes_[topk_node].k, "scatter_cols: width smaller than k");
    Node n{Op::ScatterCols};
    n.a = values;
    n.b = topk_node;
    n.width = width;
    n.rows = nodes_[values].rows;
    n.cols = width;
    return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId logits, NodeId targets) {
    check(nodes_[targets].op == Op::IntInput, "cross_entropy: targets must be an int_input");
    check(nodes_[targets].rows == nodes_[logits].rows, "cross_entropy: one target per logit row");
    Node n{Op::CrossEntropy};
    n.a = logits;
    n.b = targets;
    n.rows = 1;
    n.cols = 1;
    return push(std::move(n));
}

Evaluation::Evaluation(const Graph& g, const Bindings& b) : graph_(g) {
    const auto& nodes = g.nodes_;
    values_.resize(nodes.size());
    for (size_t id = 0; id < nodes.size(); ++id) {
        const Node& n = nodes[id];
        switch (n.op) {
            case Op::Input: {
                auto it = b.mats.find(n.name);
                if (it == b.mats.end())
                    throw std::invalid_argument("evaluate: unbound input '" + n.name + "'");
                if (it->second.rows != n.rows || it->second.cols != n.cols)
                    throw std::invalid_argument("evaluate: input '" + n.name + "' has shape " +
                                                std::to_string(it->second.rows) + "x" +
                                                std::to_string(it->second.cols) + ", expected " +
                                                std::to_string(n.rows) + "x" + std::to_string(n.cols));
                values_[id] = it->second;
                break;
            }
            case Op::IntInput: {
                auto it = b.ints.find(n.name);
                if (it == b.ints.end())
                    throw std::invalid_argument("evaluate: unbound int_input '" + n.name + "'");
                if (static_cast<int>(it->second.size()) != n.rows)
                    throw std::invalid_argument("evaluate: int_input '" + n.name + "' has wrong length");
                int_inputs_[n.name] = it->second;
                break;
            }
            case Op::Constant:
                values_[id] = n.payload;
                break;
            case Op::MatMul:
                values_[id] = matmul(values_[n.a], values_[n.b]);
                break;
            case Op::Add:
                values_[id] = spherelab::add(values_[n.a], values_[n.b]);
                break;
            case Op::ScalarMul:
                values_[id] = scale(values_[n.a], n.scalar);
                break;
            case Op::EwMul: {
                const Mat& x = values_[n.a];
                const Mat& y = values_[n.b];
                Mat out = x;
                if (x.same_shape(y)) {
                    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= y.v[i];
                } else if (y.rows == 1 && y.cols == x.cols) {
                    for (int i = 0; i < out.rows; ++i)
                        for (int j = 0; j < out.cols; ++j) out.at(i, j) *= y.at(0, j);
                } else {
                    for (int i = 0; i < out.rows; ++i) {
                        const double s = y.at(i, 0);
                        for (int j = 0; j < out.cols; ++j) out.at(i, j) *= s;
                    }
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::Transpose:
                values_[id] = transpose(values_[n.a]);
                break;
            case Op::RowSoftmax: {
                Mat out = values_[n.a];
                for (int i = 0; i < out.rows; ++i) {
                    double* row = out.row(i);
                    double mx = row[0];
                    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, row[j]);
                    double sum = 0.0;
                    for (int j = 0; j < out.cols; ++j) {
                        row[j] = std::exp(row[j] - mx);
                        sum += row[j];
                    }
                    for (int j = 0; j < out.cols; ++j) row[j] /= sum;
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::RmsNorm: {
                const Mat& x = values_[n.a];
                Mat out(x.rows, x.cols);
                for (int i = 0; i < x.rows; ++i) {
                    const double* xr = x.row(i);
                    double ms = 0.0;
                    for (int j = 0; j < x.cols; ++j) ms += xr[j] * xr[j];
                    const double s = std::sqrt(ms / x.cols + kNormEps);
                    double* yr = out.row(i);
                    for (int j = 0; j < x.cols; ++j) yr[j] = xr[j] / s;
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::LayerNorm: {
                const Mat& x = values_[n.a];
                Mat out(x.rows, x.cols);
                for (int i = 0; i < x.rows; ++i) {
                    const double* xr = x.row(i);
                    double mu = 0.0;
                    for (int j = 0; j < x.cols; ++j) mu += xr[j];
                    mu /= x.cols;
                    double var = 0.0;
                    for (int j = 0; j < x.cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
                    const double sig = std::sqrt(var / x.cols + kNormEps);
                    double* yr = out.row(i);
                    for (int j = 0; j < x.cols; ++j) yr[j] = (xr[j] - mu) / sig;
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::Silu: {
                Mat out = values_[n.a];
                for (double& x : out.v) x = x * sigmoid_scalar(x);
                values_[id] = std::move(out);
                break;
            }
            case Op::Sigmoid: {
                Mat out = values_[n.a];
                for (double& x : out.v) x = sigmoid_scalar(x);
                values_[id] = std::move(out);
                break;
            }
            case Op::Exp: {
                Mat out = values_[n.a];
                for (double& x : out.v) x = std::exp(x);
                values_[id] = std::move(out);
                break;
            }
            case Op::Log: {
                Mat out = values_[n.a];
                for (double& x : out.v) x = std::log(x);
                values_[id] = std::move(out);
                break;
            }
            case Op::GatherRows: {
                const Mat& table = values_[n.a];
                const auto& ids = int_inputs_.at(nodes[n.b].name);
                Mat out(static_cast<int>(ids.size()), table.cols);
                for (size_t r = 0; r < ids.size(); ++r) {
                    if (ids[r] < 0 || ids[r] >= table.rows)
                        throw std::invalid_argument("gather_rows: id " + std::to_string(ids[r]) +
                                                    " out of range [0," + std::to_string(table.rows) + ")");
                    std::copy(table.row(ids[r]), table.row(ids[r]) + table.cols, out.row(static_cast<int>(r)));
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::TopK: {
                const Mat& x = values_[n.a];
                Mat out(x.rows, n.k);
                std::vector<int>& idx = topk_idx_[static_cast<NodeId>(id)];
                idx.assign(static_cast<size_t>(x.rows) * n.k, 0);
                std::vector<int> order(x.cols);
                for (int i = 0; i < x.rows; ++i) {
                    const double* xr = x.row(i);
                    std::iota(order.begin(), order.end(), 0);
                    // ties break toward the lowest column index
                    std::stable_sort(order.begin(), order.end(),
                                     [&](int p, int q) { return xr[p] > xr[q]; });
                    std::vector<int> sel(order.begin(), order.begin() + n.k);
                    std::sort(sel.begin(), sel.end());
                    for (int j = 0; j < n.k; ++j) {
                        out.at(i, j) = xr[sel[j]];
                        idx[static_cast<size_t>(i) * n.k + j] = sel[j];
                    }
                }
                values_[id] = std::move(out);
                break;
            }
            case Op::ScatterCols: {
                const Mat& vals = values_[n.a];
                const auto& idx = topk_idx_.at(n.b);
                const int k = nodes[n.b].k;
                Mat out = Mat::zeros(vals.rows, n.width);
                for (int i = 0; i < vals.rows; ++i)
                    for (int j = 0; j < k; ++j)
                        out.at(i, idx[static_cast<size_t>(i) * k + j]) = vals.at(i, j);
                values_[id] = std::move(out);
                break;
            }
            case Op::CrossEntropy: {
                const Mat& z = values_[n.a];
                const auto& tg = int_inputs_.at(nodes[n.b].name);
                double total = 0.0;
                for (int i = 0; i < z.rows; ++i) {
                    const double* zr = z.row(i);
                    if (tg[i] < 0 || tg[i] >= z.cols)
                        throw std::invalid_argument("cross_entropy: target out of range");
                    double mx = zr[0];
                    for (int j = 1; j < z.cols; ++j) mx = std::max(mx, zr[j]);
                    double sum = 0.0;
                    for (int j = 0; j < z.cols; ++j) sum += std::exp(zr[j] - mx);
                    total += (mx + std::log(sum)) - zr[tg[i]];
                }
                Mat out(1, 1);
                out.at(0, 0) = total / z.rows;
                values_[id] = std::move(out);
                break;
            }
        }
    }
}

const std::vector<int>& Evaluation::topk_indices(NodeId id) const {
    auto it = topk_idx_.find(id);
    if (it == topk_idx_.end()) throw std::invalid_argument("topk_indices: node is not a topk node");
    return it->second;
}

struct Backprop {
    static GradientSet run(const Graph& g, const Evaluation& eval, const std::map<NodeId, Mat>& seeds) {
        const auto& nodes = g.nodes_;
        std::vector<Mat> adj(nodes.size());
        std::vector<bool> live(nodes.size(), false);

        auto accum = [&](NodeId id, const Mat& grad) {
            if (nodes[id].op == Op::IntInput || nodes[id].op == Op::Constant) return;
            if (!live[id]) {
                adj[id] = grad;
                live[id] = true;
            } else {
                axpy(1.0, grad, adj[id]);
            }
        };

        for (const auto& [id, seed] : seeds) {
            if (seed.rows != nodes[id].rows || seed.cols != nodes[id].cols)
                throw std::invalid_argument("backward: seed shape mismatch on node " + std::to_string(id));
            accum(id, seed);
        }

        for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
            if (!live[id]) continue;
            const Node& n = nodes[id];
            const Mat& d = adj[id];
            switch (n.op) {
                case Op::Input:
                case Op::Constant:
                case Op::IntInput:
                    break;
                case Op::MatMul:
                    accum(n.a, matmul(d, transpose(eval.value(n.b))));
                    accum(n.b, matmul(transpose(eval.value(n.a)), d));
                    break;
                case Op::Add:
                    accum(n.a, d);
                    accum(n.b, d);
                    break;
                case Op::ScalarMul:
                    accum(n.a, scale(d, n.scalar));
                    break;
                case Op::EwMul: {
                    const Mat& x = eval.value(n.a);
                    const Mat& y = eval.value(n.b);
                    if (x.same_shape(y)) {
                        Mat da = d;
                        for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= y.v[i];
                        accum(n.a, da);
                        Mat db = d;
                        for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= x.v[i];
                        accum(n.b, db);
                    } else if (y.rows == 1 && y.cols == x.cols) {
                        Mat da = d;
                        for (int i = 0; i < da.rows; ++i)
                            for (int j = 0; j < da.cols; ++j) da.at(i, j) *= y.at(0, j);
                        accum(n.a, da);
                        Mat db(1, y.cols);
                        for (int i = 0; i < d.rows; ++i)
                            for (int j = 0; j < d.cols; ++j) db.at(0, j) += d.at(i, j) * x.at(i, j);
                        accum(n.b, db);
                    } else {
                        Mat da = d;
                        for (int i = 0; i < da.rows; ++i) {
                            const double s = y.at(i, 0);
                            for (int j = 0; j < da.cols; ++j) da.at(i, j) *= s;
                        }
                        accum(n.a, da);
                        Mat db(y.rows, 1);
                        for (int i = 0; i < d.rows; ++i) {
                            double s = 0.0;
                            for (int j = 0; j < d.cols; ++j) s += d.at(i, j) * x.at(i, j);
                            db.at(i, 0) = s;
                        }
                        accum(n.b, db);
                    }
                    break;
                }
                case Op::Transpose:
                    accum(n.a, transpose(d));
                    break;
                case Op::RowSoftmax: {
                    const Mat& p = eval.value(id);
                    Mat dx(p.rows, p.cols);
                    for (int i = 0; i < p.rows; ++i) {
                        const double* pr = p.row(i);
                        const double* dr = d.row(i);
                        double dp = 0.0;
                        for (int j = 0; j < p.cols; ++j) dp += dr[j] * pr[j];
                        double* xr = dx.row(i);
                        for (int j = 0; j < p.cols; ++j) xr[j] = pr[j] * (dr[j] - dp);
                    }
                    accum(n.a, dx);
                    break;
                }
                case Op::RmsNorm: {
                    const Mat& x = eval.value(n.a);
                    Mat dx(x.rows, x.cols);
                    for (int i = 0; i < x.rows; ++i) {
                        const double* xr = x.row(i);
                        const double* dr = d.row(i);
                        double ms = 0.0, dxx = 0.0;
                        for (int j = 0; j < x.cols; ++j) ms += xr[j] * xr[j];
                        const double s = std::sqrt(ms / x.cols + kNormEps);
                        for (int j = 0; j < x.cols; ++j) dxx += dr[j] * xr[j];
                        const double c = dxx / (x.cols * s * s * s);
                        double* out = dx.row(i);
                        for (int j = 0; j < x.cols; ++j) out[j] = dr[j] / s - c * xr[j];
                    }
                    accum(n.a, dx);
                    break;
                }
                case Op::LayerNorm: {
                    const Mat& x = eval.value(n.a);
                    Mat dx(x.rows, x.cols);
                    for (int i = 0; i < x.rows; ++i) {
                        const double* xr = x.row(i);
                        const double* dr = d.row(i);
                        const int dcols = x.cols;
                        double mu = 0.0;
                        for (int j = 0; j < dcols; ++j) mu += xr[j];
                        mu /= dcols;
                        double var = 0.0;
                        for (int j = 0; j < dcols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
                        const double sig = std::sqrt(var / dcols + kNormEps);
                        double dmean = 0.0, dv = 0.0;
                        for (int j = 0; j < dcols; ++j) dmean += dr[j];
                        dmean /= dcols;
                        for (int j = 0; j < dcols; ++j) dv += dr[j] * (xr[j] - mu);
                        const double c = dv / (dcols * sig * sig * sig);
                        double* out = dx.row(i);
                        for (int j = 0; j < dcols; ++j)
                            out[j] = (dr[j] - dmean) / sig - c * (xr[j] - mu);
                    }
                    accum(n.a, dx);
                    break;
                }
                case Op::Silu: {
                    const Mat& x = eval.value(n.a);
                    Mat dx = d;
                    for (size_t i = 0; i < dx.v.size(); ++i) {
                        const double s = sigmoid_scalar(x.v[i]);
                        dx.v[i] *= s * (1.0 + x.v[i] * (1.0 - s));
                    }
                    accum(n.a, dx);
                    break;
                }
                case Op::Sigmoid: {
                    const Mat& y = eval.value(id);
                    Mat dx = d;
                    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y.v[i] * (1.0 - y.v[i]);
                    accum(n.a, dx);
                    break;
                }
                case Op::Exp: {
                    const Mat& y = eval.value(id);
                    Mat dx = d;
                    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y.v[i];
                    accum(n.a, dx);
                    break;
                }
                case Op::Log: {
                    const Mat& x = eval.value(n.a);
                    Mat dx = d;
                    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] /= x.v[i];
                    accum(n.a, dx);
                    break;
                }
                case Op::GatherRows: {
                    const Mat& table = eval.value(n.a);
                    const auto& ids = eval.int_inputs_.at(nodes[n.b].name);
                    Mat dt = Mat::zeros(table.rows, table.cols);
                    for (size_t r = 0; r < ids.size(); ++r) {
                        const double* dr = d.row(static_cast<int>(r));
                        double* tr = dt.row(ids[r]);
                        for (int j = 0; j < table.cols; ++j) tr[j] += dr[j];
                    }
                    accum(n.a, dt);
                    break;
                }
                case Op::TopK: {
                    const Mat& x = eval.value(n.a);
                    const auto& idx = eval.topk_indices(id);
                    Mat dx = Mat::zeros(x.rows, x.cols);
                    for (int i = 0; i < x.rows; ++i)
                        for (int j = 0; j < n.k; ++j)
                            dx.at(i, idx[static_cast<size_t>(i) * n.k + j]) += d.at(i, j);
                    accum(n.a, dx);
                    break;
                }
                case Op::ScatterCols: {
                    const auto& idx = eval.topk_indices(n.b);
                    const int k = nodes[n.b].k;
                    Mat dv(d.rows, k);
                    for (int i = 0; i < d.rows; ++i)
                        for (int j = 0; j < k; ++j)
                            dv.at(i, j) = d.at(i, idx[static_cast<size_t>(i) * k + j]);
                    accum(n.a, dv);
                    break;
                }
                case Op::CrossEntropy: {
                    const Mat& z = eval.value(n.a);
                    const auto& tg = eval.int_inputs_.at(nodes[n.b].name);
                    const double seed = d.at(0, 0);
                    Mat dz(z.rows, z.cols);
                    for (int i = 0; i < z.rows; ++i) {
                        const double* zr = z.row(i);
                        double mx = zr[0];
                        for (int j = 1; j < z.cols; ++j) mx = std::max(mx, zr[j]);
                        double sum = 0.0;
                        for (int j = 0; j < z.cols; ++j) sum += std::exp(zr[j] - mx);
                        double* out = dz.row(i);
                        const double w = seed / z.rows;
                        for (int j = 0; j < z.cols; ++j) out[j] = w * std::exp(zr[j] - mx) / sum;
                        out[tg[i]] -= w;
                    }
                    accum(n.a, dz);
                    break;
                }
            }
        }

        GradientSet grads;
        for (size_t id = 0; id < nodes.size(); ++id) {
            if (nodes[id].op == Op::Input && live[id]) grads[nodes[id].name] = std::move(adj[id]);
        }
        return grads;
    }
};

GradientSet backward(const Graph& g, const Evaluation& eval, const std::map<NodeId, Mat>& seeds) {
    return Backprop::run(g, eval, seeds);
}

GradientSet backward(const Graph& g, const Evaluation& eval, NodeId out, const Mat& seed) {
    return Backprop::run(g, eval, {{out, seed}});
}

}  // namespace spherelab::autodiff
