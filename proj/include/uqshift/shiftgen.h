// Copyright 2026 The uqshift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UQSHIFT_SHIFTGEN_H_
#define UQSHIFT_SHIFTGEN_H_

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "uqshift/datamodel.h"

namespace uqshift {

// Synthetic stand-ins for each shift category. All generators are pure
// functions of (params, seed).

enum class ShiftKind {
  kInternalTest,
  kSubtypeShift,
  kCovariateShift,
  kNovelCondition,  // near displacement (scc analog)
  kOrganShift,      // far displacement (colon analog)
  kModalityShift,
};

DistributionTag TagForShift(ShiftKind kind);

// Two unit-variance isotropic Gaussians in R^m. The normal class (label 0)
// sits at -separation/2 * e0 and the disease class (label 1) at
// +separation/2 * e0.
struct InDomainParams {
  int feature_dim = 8;
  double separation = 6.0;

  Eigen::VectorXd ClassMean(int label) const;
};

struct InDomainSplit {
  Dataset train;
  Dataset test;
};

// Draws one pool of (n_train + n_test) samples per class and splits it, so
// train and test are disjoint by construction.
InDomainSplit GenInDomain(const InDomainParams& base, int n_train_per_class,
                          int n_test_per_class, uint64_t seed);

// Disease-positive samples only (label 1): k sub-clusters displaced by
// `spread` from the disease mean along seeded random unit directions. The
// sub-type index is stored in `meta` as "subtype_<j>".
Dataset GenSubtypeShift(const InDomainParams& base, int k_subtypes,
                        double spread, int n_per_subtype, uint64_t seed);

// x <- scale * R x + offset applied to in-domain draws.
struct AffineTransform {
  double scale = 1.0;
  Eigen::MatrixXd rotation;  // empty = identity
  Eigen::VectorXd offset;    // empty = zero

  Eigen::VectorXd Apply(const Eigen::VectorXd& x) const;
  // Rotation by `angle` radians in the (axis_a, axis_b) plane.
  static Eigen::MatrixXd PlaneRotation(int dim, int axis_a, int axis_b,
                                       double angle);
};

Dataset GenCovariateShift(const InDomainParams& base,
                          const AffineTransform& transform, int n_per_class,
                          uint64_t seed);

// Normal class unchanged; the positive class is re-centered at
// disease_mean + displacement.
Dataset GenNovelCondition(const InDomainParams& base,
                          const Eigen::VectorXd& displacement,
                          int n_per_class, uint64_t seed, DistributionTag tag);

// A different generative family: class c is centered at
// center + (c ? +1 : -1) * class_offset * e1 with per-axis standard
// deviations `axis_scales`, then passed through the componentwise warp
// t -> sinh(warp * t) / warp.
struct ModalitySpec {
  double class_offset = 0.5;
  Eigen::VectorXd center;          // empty = origin
  std::vector<double> axis_scales;  // empty = all 1
  double warp = 0.5;

  Eigen::VectorXd Warp(const Eigen::VectorXd& z) const;
  Eigen::VectorXd Unwarp(const Eigen::VectorXd& x) const;
};

Dataset GenModalityShift(const InDomainParams& base, const ModalitySpec& spec,
                         int n_per_class, uint64_t seed);

struct SuiteParams {
  InDomainParams base;
  int n_train_per_class = 200;
  int n_test_per_class = 50;
  int n_shift_per_class = 50;

  int subtypes = 5;
  double subtype_spread = 5.0;

  double covariate_scale = 1.0;
  double covariate_angle = 0.7;  // radians, in the (e0, e1) plane
  double covariate_offset = 0.0;  // along e1

  // Novel-condition displacement = along_axis0 * e0 + orthogonal * e1,
  // relative to the disease mean.
  double scc_along = -4.5;
  double scc_orthogonal = 4.0;
  double cad_along = -5.0;
  double cad_orthogonal = 8.0;

  ModalitySpec modality;

  Eigen::VectorXd SccDisplacement() const;
  Eigen::VectorXd CadDisplacement() const;
};

// The full seven-dataset grid, one per DistributionTag kind.
std::map<DistributionTag, Dataset> GenSuite(uint64_t master_seed,
                                            const SuiteParams& params = {});

}  // namespace uqshift

#endif  // UQSHIFT_SHIFTGEN_H_
