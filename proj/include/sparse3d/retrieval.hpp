#ifndef SPARSE3D_RETRIEVAL_HPP_
#define SPARSE3D_RETRIEVAL_HPP_

#include <map>
#include <span>
#include <vector>

#include "sparse3d/nn.hpp"

namespace sparse3d {

struct RetrievalResult {
  // ranked[q]: the other objects ordered by ascending L2 distance to q (ties
  // by index), truncated to the largest requested k.
  std::vector<std::vector<int>> ranked;
  std::map<int, double> map_at_k;
};

// Average precision of one ranked list truncated at k: mean of precision@i
// over the relevant positions i <= k; zero when nothing relevant is retrieved.
double average_precision_at_k(std::span<const int> ranked, std::span<const int> labels, int query,
                              int k);

// Nearest-neighbour retrieval over embedding rows, query excluded from its own
// candidates; relevance is label equality. Requires more than max(k) rows.
RetrievalResult evaluate_retrieval(const nn::Tensor& embeddings, std::span<const int> labels,
                                   std::span<const int> ks);

}  // namespace sparse3d

#endif  // SPARSE3D_RETRIEVAL_HPP_
