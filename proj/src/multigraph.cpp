#include "maxcorr/multigraph.hpp"

#include <cstdio>
#include <ostream>

#include "maxcorr/error.hpp"

namespace maxcorr {

ad::Var soft_thresholds(ad::Var s) {
  if (s.rows() != s.cols())
    throw ShapeError("soft_thresholds: shape mismatch " + s.value().shape_str() + " vs square");
  return ad::sigmoid(ad::scale(ad::add(s, ad::transpose(s)), 0.5));
}

ad::Var soft_thresholds(ParamBinder& params) { return soft_thresholds(params(kThresholdParam)); }

ad::Var pairwise_rho(ad::Var z_l, ad::Var z_m) {
  ad::Var dots = ad::matmul_nt(z_l, z_m);
  ad::Var norms = ad::matmul_nt(ad::row_norms(z_l), ad::row_norms(z_m));
  return ad::abs(ad::div(dots, ad::add_scalar(norms, 1e-8)));
}

ad::Var pairwise_rho(const ProjectedBatch& pb, std::size_t l, std::size_t m) {
  return pairwise_rho(pb.z.at(l), pb.z.at(m));
}

// ---- MultiGraph ------------------------------------------------------------------

MultiGraph::MultiGraph(std::size_t patients, std::vector<ad::Var> in_plane,
                       std::vector<ad::Var> cross)
    : patients_(patients), in_plane_(std::move(in_plane)), cross_(std::move(cross)) {
  const std::size_t k = in_plane_.size();
  if (k == 0) throw ShapeError("MultiGraph: no planes");
  if (cross_.size() != k * (k - 1) / 2)
    throw ShapeError("MultiGraph: expected " + std::to_string(k * (k - 1) / 2) +
                     " cross blocks, got " + std::to_string(cross_.size()));
  for (const auto* list : {&in_plane_, &cross_})
    for (const ad::Var& b : *list)
      if (b.rows() != patients_ || b.cols() != patients_)
        throw ShapeError("MultiGraph: block " + b.value().shape_str() + " vs " +
                         shape_str(patients_, patients_));
}

std::size_t MultiGraph::pair_index(std::size_t l, std::size_t m, std::size_t planes) {
  if (l >= m || m >= planes) throw Error("MultiGraph: invalid plane pair");
  // row-major enumeration of the strict upper triangle
  return l * planes - l * (l + 1) / 2 + (m - l - 1);
}

ad::Var MultiGraph::cross(std::size_t l, std::size_t m) const {
  return cross_.at(pair_index(l, m, planes()));
}

MultiGraph build_multigraph(const ProjectedBatch& pb, ad::Var s_tilde, double threshold_offset) {
  const std::size_t k = pb.z.size();
  if (k == 0) throw ShapeError("build_multigraph: empty projected batch");
  if (s_tilde.rows() != k || s_tilde.cols() != k)
    throw ShapeError("build_multigraph: thresholds " + s_tilde.value().shape_str() + " vs " +
                     shape_str(k, k));
  auto threshold = [&](std::size_t l, std::size_t m) {
    ad::Var t = ad::element(s_tilde, l, m);
    return threshold_offset != 0.0 ? ad::add_scalar(t, threshold_offset) : t;
  };
  std::vector<ad::Var> in_plane, cross;
  for (std::size_t p = 0; p < k; ++p)
    in_plane.push_back(ad::relu(ad::sub(pairwise_rho(pb, p, p), threshold(p, p))));
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = l + 1; m < k; ++m)
      cross.push_back(ad::relu(ad::sub(pairwise_rho(pb, l, m), threshold(l, m))));
  return MultiGraph(pb.rows(), std::move(in_plane), std::move(cross));
}

// ---- supra matrices --------------------------------------------------------------

namespace {

using Grid = std::vector<std::vector<std::optional<ad::Var>>>;

// Cross block in orientation (l, m), l != m.
ad::Var oriented_cross(const MultiGraph& mg, std::size_t l, std::size_t m) {
  return l < m ? mg.cross(l, m) : ad::transpose(mg.cross(m, l));
}

}  // namespace

SupraMatrices assemble_supra(const MultiGraph& mg) {
  const std::size_t k = mg.planes();
  const std::size_t p = mg.patients();
  ad::Tape& tape = *mg.in_plane(0).tape();
  ad::Var eye = tape.constant(Matrix::identity(p));

  Grid a_grid(k, std::vector<std::optional<ad::Var>>(k));
  Grid c_grid = a_grid, ac_grid = a_grid, ca_grid = a_grid;
  std::vector<std::vector<std::optional<ad::Var>>> cross_oriented(k, std::vector<std::optional<ad::Var>>(k));
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = 0; m < k; ++m)
      if (l != m) cross_oriented[l][m] = oriented_cross(mg, l, m);

  for (std::size_t l = 0; l < k; ++l) {
    a_grid[l][l] = mg.in_plane(l);
    c_grid[l][l] = eye;
    ac_grid[l][l] = mg.in_plane(l);
    ca_grid[l][l] = mg.in_plane(l);
    for (std::size_t m = 0; m < k; ++m) {
      if (l == m) continue;
      c_grid[l][m] = *cross_oriented[l][m];
      ac_grid[l][m] = ad::matmul(mg.in_plane(l), *cross_oriented[l][m]);
      ca_grid[l][m] = ad::matmul(*cross_oriented[l][m], mg.in_plane(m));
    }
  }
  SupraMatrices s;
  s.patients = p;
  s.planes = k;
  s.a_supra = ad::blocks(a_grid);
  s.c_supra = ad::blocks(c_grid);
  s.walk_ac = ad::blocks(ac_grid);
  s.walk_ca = ad::blocks(ca_grid);
  return s;
}

namespace {

void check_patient_subset(std::span<const std::size_t> patients, std::size_t scope) {
  std::vector<bool> seen(scope, false);
  for (std::size_t id : patients) {
    if (id >= scope)
      throw DataError("induced_subgraph: unknown patient index " + std::to_string(id) +
                      " (scope has " + std::to_string(scope) + ")");
    if (seen[id]) throw DataError("induced_subgraph: repeated patient index " + std::to_string(id));
    seen[id] = true;
  }
}

}  // namespace

MultiGraph induced_subgraph(const MultiGraph& mg, std::span<const std::size_t> patients) {
  check_patient_subset(patients, mg.patients());
  std::vector<ad::Var> in_plane, cross;
  for (const ad::Var& a : mg.in_plane_blocks()) in_plane.push_back(ad::submatrix(a, patients, patients));
  for (const ad::Var& c : mg.cross_blocks()) cross.push_back(ad::submatrix(c, patients, patients));
  return MultiGraph(patients.size(), std::move(in_plane), std::move(cross));
}

SupraMatrices induced_subgraph(const SupraMatrices& supra, std::span<const std::size_t> patients) {
  check_patient_subset(patients, supra.patients);
  std::vector<std::size_t> idx;
  idx.reserve(patients.size() * supra.planes);
  for (std::size_t k = 0; k < supra.planes; ++k)
    for (std::size_t i : patients) idx.push_back(k * supra.patients + i);
  SupraMatrices out;
  out.patients = patients.size();
  out.planes = supra.planes;
  out.a_supra = ad::submatrix(supra.a_supra, idx, idx);
  out.c_supra = ad::submatrix(supra.c_supra, idx, idx);
  out.walk_ac = ad::matmul(out.a_supra, out.c_supra);
  out.walk_ca = ad::matmul(out.c_supra, out.a_supra);
  return out;
}

// ---- export ----------------------------------------------------------------------

namespace {

void write_edge(std::ostream& os, std::size_t l, std::size_t m, const std::string& pi,
                const std::string& pj, double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", w);
  os << l << ',' << m << ',' << pi << ',' << pj << ',' << buf << '\n';
}

}  // namespace

std::size_t write_edge_list(std::ostream& os, const MultiGraph& mg,
                            std::span<const std::string> patient_ids) {
  if (patient_ids.size() != mg.patients())
    throw DataError("write_edge_list: " + std::to_string(patient_ids.size()) +
                    " patient ids for " + std::to_string(mg.patients()) + " patients");
  std::size_t count = 0;
  os << "plane_l,plane_m,patient_i,patient_j,weight\n";
  const std::size_t k = mg.planes(), p = mg.patients();
  for (std::size_t plane = 0; plane < k; ++plane) {
    const Matrix& a = mg.in_plane(plane).value();
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i; j < p; ++j)
        if (a(i, j) > 0.0) {
          write_edge(os, plane, plane, patient_ids[i], patient_ids[j], a(i, j));
          ++count;
        }
  }
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = l + 1; m < k; ++m) {
      const Matrix& c = mg.cross(l, m).value();
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          if (c(i, j) > 0.0) {
            write_edge(os, l, m, patient_ids[i], patient_ids[j], c(i, j));
            ++count;
          }
    }
  return count;
}

void write_thresholds(std::ostream& os, const Matrix& s_tilde) {
  os << "plane";
  for (std::size_t m = 0; m < s_tilde.cols(); ++m) os << ",plane_" << m;
  os << '\n';
  char buf[32];
  for (std::size_t l = 0; l < s_tilde.rows(); ++l) {
    os << "plane_" << l;
    for (std::size_t m = 0; m < s_tilde.cols(); ++m) {
      std::snprintf(buf, sizeof buf, "%.9g", s_tilde(l, m));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace maxcorr
