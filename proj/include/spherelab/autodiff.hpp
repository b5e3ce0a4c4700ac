#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spherelab/linalg.hpp"

namespace spherelab::autodiff {

using NodeId = int;

enum class Op {
    Input,        // named leaf matrix (differentiable)
    Constant,     // fixed matrix baked into the graph
    IntInput,     // named integer vector (ids/targets; never differentiable)
    MatMul,
    Add,
    ScalarMul,
    EwMul,        // hadamard; rhs may broadcast as (1,c) row or (r,1) column
    Transpose,
    RowSoftmax,
    RmsNorm,      // per-row x / sqrt(mean(x^2) + eps)
    LayerNorm,    // per-row (x - mu) / sqrt(mean((x-mu)^2) + eps), no affine
    Silu,
    Sigmoid,
    Exp,
    Log,
    GatherRows,   // out[r] = table[ids[r]]
    TopK,         // per-row top-k values; indices are constants w.r.t. gradients
    ScatterCols,  // place (r,k) values at a TopK node's indices inside (r,width)
    CrossEntropy, // mean nats/row of softmax cross-entropy against int targets
};

constexpr double kNormEps = 1e-6;  // rms/layer-norm epsilon

struct Node {
    Op op;
    std::string name;   // Input/IntInput name; used in error messages
    NodeId a = -1;
    NodeId b = -1;
    double scalar = 0.0;  // ScalarMul
    int k = 0;            // TopK
    int width = 0;        // ScatterCols
    Mat payload;          // Constant value
    int rows = 0;
    int cols = 0;         // IntInput: rows = length, cols = 1
};

struct Bindings {
    std::map<std::string, Mat> mats;
    std::map<std::string, std::vector<int>> ints;
};

/// Static computation graph over the fixed primitive set. Construction is
/// single-owner; a built graph is immutable from evaluate/backward's point
/// of view, so concurrent evaluations on distinct bindings are safe.
class Graph {
public:
    NodeId input(const std::string& name, int rows, int cols);
    NodeId int_input(const std::string& name, int length);
    NodeId constant(Mat m, const std::string& name = "");

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId a, double s);
    NodeId ew_mul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId row_softmax(NodeId a);
    NodeId rms_norm(NodeId a);
    NodeId layer_norm(NodeId a);
    NodeId silu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId gather_rows(NodeId table, NodeId ids);
    NodeId topk(NodeId a, int k);
    NodeId scatter_cols(NodeId values, NodeId topk_node, int width);
    NodeId cross_entropy(NodeId logits, NodeId targets);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const Node& node(NodeId id) const { return nodes_[id]; }
    int rows(NodeId id) const { return nodes_[id].rows; }
    int cols(NodeId id) const { return nodes_[id].cols; }

private:
    NodeId push(Node n);
    void check(bool ok, const std::string& what) const;
    std::vector<Node> nodes_;
    friend class Evaluation;
    friend struct Backprop;
};

/// Forward values for one set of bindings. Pure function of (graph, bindings):
/// repeated evaluation yields bit-identical values.
class Evaluation {
public:
    Evaluation(const Graph& g, const Bindings& b);

    const Mat& value(NodeId id) const { return values_[id]; }
    /// Row-major (rows x k) selected column indices of a TopK node.
    const std::vector<int>& topk_indices(NodeId id) const;

private:
    const Graph& graph_;
    std::vector<Mat> values_;
    std::map<NodeId, std::vector<int>> topk_idx_;
    std::map<std::string, std::vector<int>> int_inputs_;
    friend struct Backprop;
};

inline Evaluation evaluate(const Graph& g, const Bindings& b) { return Evaluation(g, b); }

using GradientSet = std::map<std::string, Mat>;

/// Reverse accumulation from one or more seeded nodes. For a scalar output
/// pass a 1x1 seed of 1. Returns a gradient per differentiable Input leaf
/// reachable from a seeded node.
GradientSet backward(const Graph& g, const Evaluation& eval, const std::map<NodeId, Mat>& seeds);
GradientSet backward(const Graph& g, const Evaluation& eval, NodeId out, const Mat& seed);

}  // namespace spherelab::autodiff
