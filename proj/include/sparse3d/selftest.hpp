#ifndef SPARSE3D_SELFTEST_HPP_
#define SPARSE3D_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sparse3d/nn.hpp"

namespace sparse3d {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Max |difference| between descriptor sets of random clouds and their rigidly
// moved copies, over kinds A, B and C.
SuiteResult check_rigid_invariance(int pairs, std::uint64_t seed);
// Same with scale normalization for scale factors 1e-3, 1, 1e3.
SuiteResult check_scale_invariance(int clouds, std::uint64_t seed);
// Evaluation-mode latents of random models under random row permutations;
// passes only on bitwise equality.
SuiteResult check_permutation_invariance(int models, int permutations, std::uint64_t seed);
// Untrained-model predictions on synthetic objects with and without an SO(3)
// rotation, descriptor seeds matched.
SuiteResult check_pose_invariance(int objects, std::uint64_t seed);

struct GradcheckReport {
  nn::GradientCheckResult full_model;       // batchnorm off, train mode
  nn::GradientCheckResult full_model_eval;  // batchnorm on, eval mode
  std::vector<std::pair<std::string, nn::GradientCheckResult>> layers;
};

// Toy dims: Type-A input (F=4), latent 8, R=2.
GradcheckReport run_gradcheck(std::uint64_t seed);
SuiteResult check_gradients(std::uint64_t seed);

SuiteResult check_voxel_threshold();
SuiteResult check_round_trips(std::uint64_t seed);
SuiteResult check_retrieval(std::uint64_t seed);

std::vector<SuiteResult> run_selftests(std::uint64_t seed);

}  // namespace sparse3d

#endif  // SPARSE3D_SELFTEST_HPP_
