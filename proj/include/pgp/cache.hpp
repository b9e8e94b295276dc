#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pgp/posterior.hpp"

namespace pgp {

/// Sizes of every catalog content (seen first, then unseen) and which of
/// them have request history.
struct ContentCatalog {
  Vector sizes;
  std::vector<bool> seen;

  ContentCatalog() = default;
  ContentCatalog(Vector sizes_, std::vector<bool> seen_);

  Index contents() const noexcept { return sizes.size(); }
  Index seen_count() const;
  double total_size() const { return sizes.sum(); }
  void validate() const;
};

struct CachePlan {
  std::vector<bool> selected;
  double used_capacity = 0.0;
  double predicted_value = 0.0;  // sum of predicted popularity over cached contents

  Index cached_count() const;
};

/// Ratio greedy for max w'r s.t. w's <= C: visit contents by descending
/// r/s (ties by ascending index) and take each one that still fits. The
/// fill is repeated with each single content forced in first and the best
/// plan kept (ties go to the plain fill), then one-for-one exchanges are
/// applied while any raises the value. Equal sizes skip both extra passes,
/// since the plain fill is already optimal there.
CachePlan place(const Vector& popularities, const ContentCatalog& catalog, double capacity);

/// Exact 0/1 knapsack by dynamic programming. Sizes are rounded up and the
/// capacity rounded down to multiples of `grid`, so the plan is feasible for
/// the true sizes and optimal for the rounded ones.
CachePlan place_exact_small(const Vector& popularities, const ContentCatalog& catalog,
                            double capacity, int max_items = 25, double grid = 0.01);

/// Seen contents ranked by MLE popularity per size fill `seen_share` of C;
/// unseen contents in a seeded uniform order fill the rest. Budget left over
/// in one part is not handed to the other.
CachePlan mle_rand_place(const RequestMatrix& data, const ContentCatalog& catalog,
                         double capacity, std::uint64_t seed, double seen_share = 0.8);

/// Cached future requests over all future requests, 0 when nothing is requested.
double evaluate_chr(const CachePlan& plan, const RequestMatrix& future);
double evaluate_chr(const CachePlan& plan, const Vector& future_totals);

/// CSV: content_id,size,predicted_popularity,selected
void write_plan_csv(const std::filesystem::path& path, const CachePlan& plan,
                    const ContentCatalog& catalog, const Vector& popularities);

}  // namespace pgp
