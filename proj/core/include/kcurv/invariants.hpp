#pragma once

// Scalar Weyl invariants: full contractions of products of nabla^k R.
//
// A schema lists factor derivative orders; the slots of all factors are
// numbered consecutively (factor 0 owns slots 0..3+k0, and so on) and a
// perfect matching of those slots says which pairs are contracted with g^{-1}.
//
// Line format: "R,dR,ddR|((0,3),(1,2),...)", where "d"*k + "R" names nabla^k R.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kcurv/curvature.hpp"

namespace kcurv {

struct ContractionSchema {
  std::vector<int> factors;
  std::vector<std::pair<int, int>> pairs;

  int total_slots() const noexcept;
  int max_derivative() const noexcept;

  /// Throws SpecError unless the pairs form a perfect matching of the slots.
  void validate() const;

  static ContractionSchema parse(std::string_view line);
  std::string to_string() const;

  /// Representative invariant under reordering of equal-order factors and
  /// under pair orientation and order; equal canonical forms evaluate equally.
  ContractionSchema canonical() const;

  friend bool operator==(const ContractionSchema&, const ContractionSchema&) = default;
};

namespace schemas {
ContractionSchema scalar_curvature();    // R|((0,3),(1,2))
ContractionSchema ricci_norm();          // |Ric|^2
ContractionSchema riemann_norm();        // |R|^2
ContractionSchema nabla_riemann_norm();  // |nabla R|^2
ContractionSchema cubic_a();             // R_ijkl R^klmn R_mn^ij
ContractionSchema cubic_b();             // R_ijkl R^imkn R^j_m^l_n
ContractionSchema laplacian_scalar();    // ddR|((0,3),(1,2),(4,5))
}  // namespace schemas

/// Limits beyond which catalog() refuses to run.
inline constexpr int kMaxCatalogFactors = 4;
inline constexpr int kMaxCatalogDerivative = 4;

struct CatalogOptions {
  int exhaustive_slot_limit = 10;  // enumerate every matching up to this many slots
  int samples_per_multiset = 64;   // random matchings for larger factor lists
  std::uint64_t seed = 20240601;
};

/// Deduplicated schemas with at most `max_factors` factors of order at most
/// `max_deriv`, starting with the named invariants that fit the caps.
std::vector<ContractionSchema> catalog(int max_factors, int max_deriv, const CatalogOptions& options = {});

/// `count` random schemas with 2..max_factors factors of order 0..max_deriv.
std::vector<ContractionSchema> random_schemas(int count, std::uint64_t seed, int max_factors = 4, int max_deriv = 3);

/// Sparse evaluation: walks only over non-zero components of each factor and
/// non-zero entries of g^{-1}.
double evaluate(const ContractionSchema& schema, CurvatureEngine& engine);

/// Reference evaluation over every index assignment; exponential in the slot count.
double evaluate_dense(const ContractionSchema& schema, CurvatureEngine& engine);

/// prod_j max|nabla^{k_j} R| * max|g^{-1}|^{pairs}, floored at 1.
double contraction_scale(const ContractionSchema& schema, CurvatureEngine& engine);

}  // namespace kcurv
