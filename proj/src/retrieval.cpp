#include "sparse3d/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "sparse3d/error.hpp"

namespace sparse3d {

double average_precision_at_k(std::span<const int> ranked, std::span<const int> labels, int query,
                              int k) {
  const int label = labels[static_cast<std::size_t>(query)];
  const int depth = std::min<int>(k, static_cast<int>(ranked.size()));
  int hits = 0;
  double sum = 0.0;
  for (int i = 0; i < depth; ++i) {
    if (labels[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)])] == label) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return hits == 0 ? 0.0 : sum / hits;
}

RetrievalResult evaluate_retrieval(const nn::Tensor& embeddings, std::span<const int> labels,
                                   std::span<const int> ks) {
  const int n = static_cast<int>(embeddings.rows());
  if (static_cast<std::size_t>(n) != labels.size()) throw Error("labels do not match embeddings");
  if (ks.empty()) throw Error("no k requested");
  const int max_k = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) < 1) throw Error("k must be >= 1");
  if (n < max_k + 1) {
    throw Error("retrieval needs more than " + std::to_string(max_k) + " objects, got " +
                std::to_string(n));
  }

  RetrievalResult result;
  result.ranked.resize(static_cast<std::size_t>(n));
  std::vector<double> dist(static_cast<std::size_t>(n));
  std::vector<int> order;
  for (int q = 0; q < n; ++q) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
        const double d = embeddings(q, c) - embeddings(j, c);
        s += d * d;
      }
      dist[static_cast<std::size_t>(j)] = s;
    }
    order.resize(static_cast<std::size_t>(n - 1));
    int w = 0;
    for (int j = 0; j < n; ++j) {
      if (j != q) order[static_cast<std::size_t>(w++)] = j;
    }
    auto closer = [&](int a, int b) {
      const double da = dist[static_cast<std::size_t>(a)], db = dist[static_cast<std::size_t>(b)];
      return da < db || (da == db && a < b);
    };
    std::partial_sort(order.begin(), order.begin() + max_k, order.end(), closer);
    result.ranked[static_cast<std::size_t>(q)].assign(order.begin(), order.begin() + max_k);
  }
  for (int k : ks) {
    double total = 0.0;
    for (int q = 0; q < n; ++q) {
      total += average_precision_at_k(result.ranked[static_cast<std::size_t>(q)], labels, q, k);
    }
    result.map_at_k[k] = total / n;
  }
  return result;
}

}  // namespace sparse3d
