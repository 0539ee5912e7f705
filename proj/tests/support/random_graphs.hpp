#pragma once

// Random differentiable graphs for gradient checks.

#include <vector>

#include "rearrange/autodiff.hpp"

namespace rearrange::testing {

// A random graph is a chain of shape-preserving blocks over x[B, n, n]
// followed by a weighted reduction; every op kind appears in some block.
inline ad::Var random_block(ad::Graph& g, ad::Var x, const std::vector<ad::Var>& p, int kind) {
  const std::size_t n = x.shape()[1];
  switch (kind) {
    case 0: return g.relu(g.affine(x, p[1], p[2]));
    case 1: return g.softplus(g.affine(x, p[1], p[2]));
    case 2: return g.sigmoid(g.matmul(x, p[3]));
    case 3: return g.scale(g.square(g.matmul(x, p[3], true)), 0.5);
    case 4: {
      ad::Var scores = g.softmax(g.scale(g.batched_matmul(x, x, false, true), 0.5));
      return g.batched_matmul(scores, x) + x;
    }
    case 5: {
      ad::Var t = g.transpose(x);
      return g.scale(g.batched_matmul(t, t, true, true) + g.batched_matmul(t, x, true, false), 0.3);
    }
    case 6: return x - g.broadcast(g.mean(x, 1), 1, n) + g.scale(g.broadcast(g.sum(x, 2), 2, n), 0.1);
    case 7: {
      ad::Var permuted = g.concat({g.slice(x, 1, n - 1), g.slice(x, 0, 1)});
      return permuted * x + g.embed(g.slice(x, 0, 2), 1, n);
    }
    case 8: {
      const ad::Shape shape = x.shape();
      ad::Var flat = g.reshape(x, {shape[0] * shape[1], shape[2]});
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < shape[0] * shape[1]; ++r) rows.push_back((r * 2 + 1) % (shape[0] * shape[1]));
      ad::Var mixed = g.scatter_add_rows(g.gather_rows(flat, rows), rows, shape[0] * shape[1]);
      return g.reshape(mixed, shape) + g.sin(x);
    }
    case 9: return g.cos(x) + g.scale(g.broadcast_leading(g.sum_leading(x), x.shape()), 0.2);
    case 10: return g.matmul(x, g.scale(g.outer_contract(x, x), 0.1)) - g.add_scalar(x, 0.5);
    default: return x * g.fill(g.mean_all(x), x.shape()) + g.fill(g.sum_all(x), x.shape());
  }
}

constexpr int kBlockKinds = 12;

}  // namespace rearrange::testing
