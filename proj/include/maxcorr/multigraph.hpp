#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/parameters.hpp"
#include "maxcorr/projections.hpp"

namespace maxcorr {

inline constexpr const char* kThresholdParam = "graph.S";

/// sigmoid((S + S^T) / 2): exactly symmetric K x K thresholds in (0, 1).
ad::Var soft_thresholds(ad::Var s);
ad::Var soft_thresholds(ParamBinder& params);

/// |cos(z_l[i], z_m[j])| for all pairs, with 1e-8 added to the norm product.
ad::Var pairwise_rho(ad::Var z_l, ad::Var z_m);
ad::Var pairwise_rho(const ProjectedBatch& pb, std::size_t l, std::size_t m);

/// Patient-modality multi-layered graph over P patients and K planes.
/// Cross-plane blocks are stored once per unordered pair (l < m); the
/// (m, l) orientation is the transpose.
class MultiGraph {
 public:
  MultiGraph(std::size_t patients, std::vector<ad::Var> in_plane, std::vector<ad::Var> cross);

  std::size_t patients() const noexcept { return patients_; }
  std::size_t planes() const noexcept { return in_plane_.size(); }
  std::size_t supra_index(std::size_t patient, std::size_t plane) const {
    return plane * patients_ + patient;
  }

  ad::Var in_plane(std::size_t k) const { return in_plane_.at(k); }
  /// Stored block for l < m.
  ad::Var cross(std::size_t l, std::size_t m) const;
  const std::vector<ad::Var>& in_plane_blocks() const noexcept { return in_plane_; }
  const std::vector<ad::Var>& cross_blocks() const noexcept { return cross_; }

  static std::size_t pair_index(std::size_t l, std::size_t m, std::size_t planes);

 private:
  std::size_t patients_;
  std::vector<ad::Var> in_plane_;
  std::vector<ad::Var> cross_;
};

/// C_(l,m)[i,j] = ReLU(rho - S~[l,m]), A_k[i,j] = ReLU(rho - S~[k,k]).
/// `threshold_offset` is added to every threshold (inspection/debug only).
MultiGraph build_multigraph(const ProjectedBatch& pb, ad::Var s_tilde,
                            double threshold_offset = 0.0);

struct SupraMatrices {
  std::size_t patients = 0;
  std::size_t planes = 0;
  ad::Var a_supra;  // block diagonal, PK x PK
  ad::Var c_supra;  // identity diagonal blocks, cross blocks elsewhere
  ad::Var walk_ac;  // A_supra * C_supra
  ad::Var walk_ca;  // C_supra * A_supra
};

/// Assembles the supra matrices. Walk products are formed block by block:
/// (AC)[l,m] = A_l C[l,m] and (CA)[l,m] = C[l,m] A_m.
SupraMatrices assemble_supra(const MultiGraph& mg);

/// Restricts every plane to `patients` (indices into the current scope, in
/// the given order). Throws DataError on an out-of-range or repeated index.
MultiGraph induced_subgraph(const MultiGraph& mg, std::span<const std::size_t> patients);
/// Same restriction on assembled matrices; walks are recomputed from the
/// restricted A_supra and C_supra.
SupraMatrices induced_subgraph(const SupraMatrices& supra, std::span<const std::size_t> patients);

/// Plain-text edge list: header, then "plane_l,plane_m,patient_i,patient_j,weight"
/// per nonzero edge with 9 significant digits. In-plane edges are listed for
/// i <= j, cross-plane edges for l < m.
std::size_t write_edge_list(std::ostream& os, const MultiGraph& mg,
                            std::span<const std::string> patient_ids);
void write_thresholds(std::ostream& os, const Matrix& s_tilde);

}  // namespace maxcorr
