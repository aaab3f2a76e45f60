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

#include "uqshift/shiftgen.h"

#include <cmath>
#include <stdexcept>

#include "uqshift/rng.h"

namespace uqshift {
namespace {

using Kind = DistributionTag::Kind;

// Seed labels for the suite's generators.
enum SuiteStream : uint64_t {
  kStreamInDomain = 1,
  kStreamSubtype,
  kStreamCovariate,
  kStreamScc,
  kStreamCad,
  kStreamModality,
};

Eigen::VectorXd StandardNormal(int dim, RngStream& rng) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.Normal();
  return v;
}

std::vector<double> ToStd(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

LabeledSample MakeSample(const Eigen::VectorXd& x, int label,
                         DistributionTag tag, const std::string& origin,
                         uint64_t uid, std::string meta = {}) {
  LabeledSample s;
  s.features = ToStd(x);
  s.label = label;
  s.tag = std::move(tag);
  s.origin = origin;
  s.uid = uid;
  s.meta = std::move(meta);
  return s;
}

void CheckBase(const InDomainParams& base) {
  if (base.feature_dim < 2) {
    throw std::invalid_argument("feature_dim must be >= 2");
  }
  if (!(base.separation >= 0.0)) {
    throw std::invalid_argument("separation must be >= 0");
  }
}

// In-domain draws, interleaved by class: (normal, disease) per index. The
// covariate generator reuses this exact sequence.
std::vector<std::pair<int, Eigen::VectorXd>> SampleInDomain(
    const InDomainParams& base, int n_per_class, RngStream& rng) {
  std::vector<std::pair<int, Eigen::VectorXd>> draws;
  draws.reserve(2 * n_per_class);
  const Eigen::VectorXd means[2] = {base.ClassMean(0), base.ClassMean(1)};
  for (int i = 0; i < n_per_class; ++i) {
    for (int label = 0; label < 2; ++label) {
      draws.emplace_back(label,
                         means[label] + StandardNormal(base.feature_dim, rng));
    }
  }
  return draws;
}

}  // namespace

DistributionTag TagForShift(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kInternalTest:
      return DistributionTag(Kind::kInTest);
    case ShiftKind::kSubtypeShift:
      return DistributionTag(Kind::kExt5ad);
    case ShiftKind::kCovariateShift:
      return DistributionTag(Kind::kExtProt);
    case ShiftKind::kNovelCondition:
      return DistributionTag(Kind::kOodScc);
    case ShiftKind::kOrganShift:
      return DistributionTag(Kind::kOodCad);
    case ShiftKind::kModalityShift:
      return DistributionTag(Kind::kOodCxr);
  }
  throw std::invalid_argument("unknown shift kind");
}

Eigen::VectorXd InDomainParams::ClassMean(int label) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(feature_dim);
  mean[0] = (label == 0 ? -0.5 : 0.5) * separation;
  return mean;
}

InDomainSplit GenInDomain(const InDomainParams& base, int n_train_per_class,
                          int n_test_per_class, uint64_t seed) {
  CheckBase(base);
  if (n_train_per_class < 1 || n_test_per_class < 1) {
    throw std::invalid_argument("n_per_class must be >= 1");
  }
  RngStream rng(seed, kStreamInDomain);
  const auto draws =
      SampleInDomain(base, n_train_per_class + n_test_per_class, rng);
  std::vector<LabeledSample> train, test;
  for (size_t i = 0; i < draws.size(); ++i) {
    const bool is_train = i / 2 < static_cast<size_t>(n_train_per_class);
    const auto tag = DistributionTag(is_train ? Kind::kInTrain : Kind::kInTest);
    (is_train ? train : test)
        .push_back(MakeSample(draws[i].second, draws[i].first, tag,
                              "in_domain", i));
  }
  return {Dataset("in_train", 2, base.feature_dim, std::move(train)),
          Dataset("in_test", 2, base.feature_dim, std::move(test))};
}

Dataset GenSubtypeShift(const InDomainParams& base, int k_subtypes,
                        double spread, int n_per_subtype, uint64_t seed) {
  CheckBase(base);
  if (k_subtypes < 2) throw std::invalid_argument("k_subtypes must be >= 2");
  if (n_per_subtype < 1) throw std::invalid_argument("n_per_subtype < 1");
  RngStream rng(seed, kStreamSubtype);
  const Eigen::VectorXd disease = base.ClassMean(1);
  std::vector<Eigen::VectorXd> centers;
  for (int j = 0; j < k_subtypes; ++j) {
    const Eigen::VectorXd dir = StandardNormal(base.feature_dim, rng);
    centers.push_back(disease + spread * dir.normalized());
  }
  std::vector<LabeledSample> samples;
  const DistributionTag tag(Kind::kExt5ad);
  for (int i = 0; i < n_per_subtype; ++i) {
    for (int j = 0; j < k_subtypes; ++j) {
      samples.push_back(MakeSample(
          centers[j] + StandardNormal(base.feature_dim, rng), 1, tag,
          "ext_5ad", samples.size(), "subtype_" + std::to_string(j)));
    }
  }
  return Dataset("ext_5ad", 2, base.feature_dim, std::move(samples));
}

Eigen::VectorXd AffineTransform::Apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = rotation.size() == 0 ? x : Eigen::VectorXd(rotation * x);
  if (scale != 1.0) y *= scale;
  if (offset.size() != 0) y += offset;
  return y;
}

Eigen::MatrixXd AffineTransform::PlaneRotation(int dim, int axis_a, int axis_b,
                                               double angle) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  r(axis_a, axis_a) = std::cos(angle);
  r(axis_a, axis_b) = -std::sin(angle);
  r(axis_b, axis_a) = std::sin(angle);
  r(axis_b, axis_b) = std::cos(angle);
  return r;
}

Dataset GenCovariateShift(const InDomainParams& base,
                          const AffineTransform& transform, int n_per_class,
                          uint64_t seed) {
  CheckBase(base);
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  const int m = base.feature_dim;
  if ((transform.rotation.size() != 0 &&
       (transform.rotation.rows() != m || transform.rotation.cols() != m)) ||
      (transform.offset.size() != 0 && transform.offset.size() != m)) {
    throw std::invalid_argument("transform does not match feature_dim");
  }
  RngStream rng(seed, kStreamInDomain);
  const auto draws = SampleInDomain(base, n_per_class, rng);
  std::vector<LabeledSample> samples;
  const DistributionTag tag(Kind::kExtProt);
  for (size_t i = 0; i < draws.size(); ++i) {
    samples.push_back(MakeSample(transform.Apply(draws[i].second),
                                 draws[i].first, tag, "ext_prot", i));
  }
  return Dataset("ext_prot", 2, m, std::move(samples));
}

Dataset GenNovelCondition(const InDomainParams& base,
                          const Eigen::VectorXd& displacement,
                          int n_per_class, uint64_t seed,
                          DistributionTag tag) {
  CheckBase(base);
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (displacement.size() != base.feature_dim) {
    throw std::invalid_argument("displacement does not match feature_dim");
  }
  RngStream rng(seed, kStreamInDomain);
  const Eigen::VectorXd means[2] = {base.ClassMean(0),
                                    base.ClassMean(1) + displacement};
  std::vector<LabeledSample> samples;
  for (int i = 0; i < n_per_class; ++i) {
    for (int label = 0; label < 2; ++label) {
      samples.push_back(MakeSample(
          means[label] + StandardNormal(base.feature_dim, rng), label, tag,
          tag.name(), samples.size()));
    }
  }
  return Dataset(tag.name(), 2, base.feature_dim, std::move(samples));
}

Eigen::VectorXd ModalitySpec::Warp(const Eigen::VectorXd& z) const {
  if (warp == 0.0) return z;
  return z.unaryExpr([this](double t) { return std::sinh(warp * t) / warp; });
}

Eigen::VectorXd ModalitySpec::Unwarp(const Eigen::VectorXd& x) const {
  if (warp == 0.0) return x;
  return x.unaryExpr([this](double t) { return std::asinh(warp * t) / warp; });
}

Dataset GenModalityShift(const InDomainParams& base, const ModalitySpec& spec,
                         int n_per_class, uint64_t seed) {
  CheckBase(base);
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  const int m = base.feature_dim;
  if ((spec.center.size() != 0 && spec.center.size() != m) ||
      (!spec.axis_scales.empty() &&
       static_cast<int>(spec.axis_scales.size()) != m)) {
    throw std::invalid_argument("modality spec does not match feature_dim");
  }
  if (!(spec.warp >= 0.0)) throw std::invalid_argument("warp must be >= 0");
  const Eigen::VectorXd center =
      spec.center.size() == 0 ? Eigen::VectorXd::Zero(m) : spec.center;
  RngStream rng(seed, kStreamModality);
  std::vector<LabeledSample> samples;
  const DistributionTag tag(Kind::kOodCxr);
  for (int i = 0; i < n_per_class; ++i) {
    for (int label = 0; label < 2; ++label) {
      Eigen::VectorXd z = center;
      z[1] += (label == 0 ? -1.0 : 1.0) * spec.class_offset;
      for (int d = 0; d < m; ++d) {
        const double sd = spec.axis_scales.empty() ? 1.0 : spec.axis_scales[d];
        z[d] += sd * rng.Normal();
      }
      const Eigen::VectorXd x = spec.Warp(z);
      if (!x.allFinite()) {
        throw std::runtime_error("modality warp overflowed; reduce warp");
      }
      samples.push_back(
          MakeSample(x, label, tag, "ood_cxr", samples.size()));
    }
  }
  return Dataset("ood_cxr", 2, m, std::move(samples));
}

Eigen::VectorXd SuiteParams::SccDisplacement() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(base.feature_dim);
  d[0] = scc_along;
  d[1] = scc_orthogonal;
  return d;
}

Eigen::VectorXd SuiteParams::CadDisplacement() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(base.feature_dim);
  d[0] = cad_along;
  d[1] = cad_orthogonal;
  return d;
}

std::map<DistributionTag, Dataset> GenSuite(uint64_t master_seed,
                                            const SuiteParams& params) {
  const InDomainParams& base = params.base;
  std::map<DistributionTag, Dataset> suite;
  InDomainSplit in_domain =
      GenInDomain(base, params.n_train_per_class, params.n_test_per_class,
                  DeriveSeed(master_seed, kStreamInDomain));
  suite.emplace(DistributionTag(Kind::kInTrain), std::move(in_domain.train));
  suite.emplace(DistributionTag(Kind::kInTest), std::move(in_domain.test));

  suite.emplace(DistributionTag(Kind::kExt5ad),
                GenSubtypeShift(base, params.subtypes, params.subtype_spread,
                                std::max(1, params.n_shift_per_class /
                                                params.subtypes),
                                DeriveSeed(master_seed, kStreamSubtype)));

  AffineTransform covariate;
  covariate.scale = params.covariate_scale;
  covariate.rotation = AffineTransform::PlaneRotation(
      base.feature_dim, 0, 1, params.covariate_angle);
  covariate.offset = Eigen::VectorXd::Zero(base.feature_dim);
  covariate.offset[1] = params.covariate_offset;
  suite.emplace(DistributionTag(Kind::kExtProt),
                GenCovariateShift(base, covariate, params.n_shift_per_class,
                                  DeriveSeed(master_seed, kStreamCovariate)));

  suite.emplace(DistributionTag(Kind::kOodScc),
                GenNovelCondition(base, params.SccDisplacement(),
                                  params.n_shift_per_class,
                                  DeriveSeed(master_seed, kStreamScc),
                                  DistributionTag(Kind::kOodScc)));
  suite.emplace(DistributionTag(Kind::kOodCad),
                GenNovelCondition(base, params.CadDisplacement(),
                                  params.n_shift_per_class,
                                  DeriveSeed(master_seed, kStreamCad),
                                  DistributionTag(Kind::kOodCad)));
  suite.emplace(DistributionTag(Kind::kOodCxr),
                GenModalityShift(base, params.modality,
                                 params.n_shift_per_class,
                                 DeriveSeed(master_seed, kStreamModality)));
  return suite;
}

}  // namespace uqshift
