#include "pgp/cache.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "pgp/error.hpp"

namespace pgp {
namespace {

void check_popularities(const Vector& r, const ContentCatalog& catalog) {
  catalog.validate();
  if (r.size() != catalog.contents()) {
    throw InvalidInput("popularity vector and catalog differ in length");
  }
  if (!r.allFinite() || (r.array() < 0.0).any()) {
    throw InvalidInput("popularities must be finite and >= 0");
  }
}

void check_capacity(double capacity) {
  if (!(capacity >= 0.0) || std::isnan(capacity)) throw InvalidInput("capacity must be >= 0");
}

// Greedy over a subset of candidates; adds to `plan` in place.
void greedy_fill(const std::vector<Index>& candidates, const Vector& r, const Vector& sizes,
                 double budget, CachePlan& plan) {
  // Everything fits: take it all. Summing in catalog order matches
  // ContentCatalog::total_size(), so a budget of exactly that total is met.
  const bool all = static_cast<Index>(candidates.size()) == sizes.size();
  double everything = 0.0;
  if (all) {
    everything = sizes.sum();
  } else {
    for (Index m : candidates) everything += sizes[m];
  }
  if (everything <= budget) {
    for (Index m : candidates) {
      plan.selected[static_cast<std::size_t>(m)] = true;
      plan.predicted_value += r[m];
    }
    plan.used_capacity += everything;
    return;
  }
  std::vector<Index> order = candidates;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ra = r[a] / sizes[a];
    const double rb = r[b] / sizes[b];
    if (ra != rb) return ra > rb;
    return a < b;
  });

  // Ratio fill, optionally starting from one forced item. Plain greedy can
  // land well short of the optimum when a large valuable item is crowded out,
  // so every single-item start is tried as well (Sahni's k = 1 scheme).
  struct Fill {
    std::vector<Index> items;
    double value = 0.0;
    double used = 0.0;
  };
  auto fill = [&](Index forced) {
    Fill f;
    if (forced >= 0) {
      f.items.push_back(forced);
      f.value = r[forced];
      f.used = sizes[forced];
    }
    for (Index m : order) {
      if (m == forced) continue;
      if (f.used + sizes[m] <= budget) {
        f.used += sizes[m];
        f.value += r[m];
        f.items.push_back(m);
      }
    }
    return f;
  };
  Fill best = fill(-1);
  // Equal sizes: ratio order is value order and the plain fill is optimal.
  const double s0 = sizes[order.front()];
  const bool equal = std::all_of(order.begin(), order.end(), [&](Index m) { return sizes[m] == s0; });
  if (!equal) {
    for (Index m : order) {
      if (sizes[m] > budget) continue;
      Fill f = fill(m);
      if (f.value > best.value) best = std::move(f);
    }
    // One-for-one exchanges, best gain first, then top up with whatever fits.
    std::vector<bool> in(static_cast<std::size_t>(sizes.size()), false);
    for (Index m : best.items) in[static_cast<std::size_t>(m)] = true;
    for (;;) {
      double gain = 0.0;
      std::size_t out_pos = 0;
      Index add = -1;
      for (std::size_t k = 0; k < best.items.size(); ++k) {
        const Index i = best.items[k];
        for (Index j : order) {
          if (in[static_cast<std::size_t>(j)]) continue;
          if (best.used - sizes[i] + sizes[j] > budget) continue;
          if (r[j] - r[i] > gain) {
            gain = r[j] - r[i];
            out_pos = k;
            add = j;
          }
        }
      }
      if (add < 0) break;
      const Index drop = best.items[out_pos];
      in[static_cast<std::size_t>(drop)] = false;
      in[static_cast<std::size_t>(add)] = true;
      best.items[out_pos] = add;
      best.used += sizes[add] - sizes[drop];
      best.value += gain;
      for (Index m : order) {
        if (!in[static_cast<std::size_t>(m)] && best.used + sizes[m] <= budget) {
          in[static_cast<std::size_t>(m)] = true;
          best.items.push_back(m);
          best.used += sizes[m];
          best.value += r[m];
        }
      }
    }
  }
  for (Index m : best.items) plan.selected[static_cast<std::size_t>(m)] = true;
  plan.used_capacity += best.used;
  plan.predicted_value += best.value;
}

}  // namespace

ContentCatalog::ContentCatalog(Vector sizes_, std::vector<bool> seen_)
    : sizes(std::move(sizes_)), seen(std::move(seen_)) {
  validate();
}

Index ContentCatalog::seen_count() const {
  return static_cast<Index>(std::count(seen.begin(), seen.end(), true));
}

void ContentCatalog::validate() const {
  if (static_cast<Index>(seen.size()) != sizes.size()) {
    throw InvalidInput("catalog sizes and seen mask differ in length");
  }
  if (!sizes.allFinite() || (sizes.array() <= 0.0).any()) {
    throw InvalidInput("content sizes must be finite and > 0");
  }
  if (seen_count() < 1) throw InvalidInput("catalog needs at least one seen content");
}

Index CachePlan::cached_count() const {
  return static_cast<Index>(std::count(selected.begin(), selected.end(), true));
}

CachePlan place(const Vector& popularities, const ContentCatalog& catalog, double capacity) {
  check_popularities(popularities, catalog);
  check_capacity(capacity);
  CachePlan plan;
  plan.selected.assign(static_cast<std::size_t>(catalog.contents()), false);
  std::vector<Index> all(static_cast<std::size_t>(catalog.contents()));
  std::iota(all.begin(), all.end(), Index{0});
  greedy_fill(all, popularities, catalog.sizes, capacity, plan);
  return plan;
}

CachePlan place_exact_small(const Vector& popularities, const ContentCatalog& catalog,
                            double capacity, int max_items, double grid) {
  check_popularities(popularities, catalog);
  check_capacity(capacity);
  if (max_items > 25) throw InvalidInput("place_exact_small supports at most 25 items");
  if (catalog.contents() > max_items) {
    throw InvalidInput("too many items for the exact knapsack solver");
  }
  if (!(grid > 0.0)) throw InvalidInput("knapsack grid must be > 0");

  const Index n = catalog.contents();
  std::vector<long> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    // The 1e-9 slack keeps sizes that sit on the grid from rounding up a cell.
    w[static_cast<std::size_t>(i)] =
        static_cast<long>(std::ceil(catalog.sizes[i] / grid - 1e-9));
  }
  const double cells = capacity / grid;
  const long cap = std::isfinite(cells)
                       ? std::min<long>(static_cast<long>(std::floor(cells + 1e-9)),
                                        std::accumulate(w.begin(), w.end(), 0L))
                       : std::accumulate(w.begin(), w.end(), 0L);
  const auto width = static_cast<std::size_t>(cap + 1);

  // best[i][c]: optimum over the first i items with c cells.
  std::vector<std::vector<double>> best(static_cast<std::size_t>(n + 1),
                                        std::vector<double>(width, 0.0));
  for (Index i = 1; i <= n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const long wi = w[ii - 1];
    const double vi = popularities[i - 1];
    for (long c = 0; c <= cap; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      best[ii][cc] = best[ii - 1][cc];
      if (wi <= c) best[ii][cc] = std::max(best[ii][cc], best[ii - 1][cc - wi] + vi);
    }
  }

  CachePlan plan;
  plan.selected.assign(static_cast<std::size_t>(n), false);
  long c = cap;
  for (Index i = n; i >= 1; --i) {
    const auto ii = static_cast<std::size_t>(i);
    if (best[ii][static_cast<std::size_t>(c)] != best[ii - 1][static_cast<std::size_t>(c)]) {
      plan.selected[ii - 1] = true;
      plan.used_capacity += catalog.sizes[i - 1];
      plan.predicted_value += popularities[i - 1];
      c -= w[ii - 1];
    }
  }
  return plan;
}

CachePlan mle_rand_place(const RequestMatrix& data, const ContentCatalog& catalog,
                         double capacity, std::uint64_t seed, double seen_share) {
  catalog.validate();
  check_capacity(capacity);
  if (!(seen_share >= 0.0 && seen_share <= 1.0)) {
    throw InvalidInput("seen share must lie in [0, 1]");
  }
  if (data.contents() != catalog.seen_count()) {
    throw InvalidInput("request rows must match the seen contents of the catalog");
  }
  const Vector mle = mle_popularity(data);
  Vector r = Vector::Zero(catalog.contents());
  std::vector<Index> seen_idx;
  std::vector<Index> unseen_idx;
  for (Index m = 0, k = 0; m < catalog.contents(); ++m) {
    if (catalog.seen[static_cast<std::size_t>(m)]) {
      r[m] = mle[k++];
      seen_idx.push_back(m);
    } else {
      unseen_idx.push_back(m);
    }
  }

  CachePlan plan;
  plan.selected.assign(static_cast<std::size_t>(catalog.contents()), false);
  greedy_fill(seen_idx, r, catalog.sizes, seen_share * capacity, plan);

  std::mt19937_64 rng(seed);
  std::shuffle(unseen_idx.begin(), unseen_idx.end(), rng);
  const double budget = (1.0 - seen_share) * capacity;
  double used = 0.0;
  for (Index m : unseen_idx) {
    if (used + catalog.sizes[m] <= budget) {
      used += catalog.sizes[m];
      plan.selected[static_cast<std::size_t>(m)] = true;
      plan.used_capacity += catalog.sizes[m];
    }
  }
  return plan;
}

double evaluate_chr(const CachePlan& plan, const Vector& future_totals) {
  if (static_cast<Index>(plan.selected.size()) != future_totals.size()) {
    throw InvalidInput("plan and future requests differ in the number of contents");
  }
  double hit = 0.0;
  double total = 0.0;
  for (Index m = 0; m < future_totals.size(); ++m) {
    total += future_totals[m];
    if (plan.selected[static_cast<std::size_t>(m)]) hit += future_totals[m];
  }
  return total > 0.0 ? hit / total : 0.0;
}

double evaluate_chr(const CachePlan& plan, const RequestMatrix& future) {
  return evaluate_chr(plan, future.totals());
}

void write_plan_csv(const std::filesystem::path& path, const CachePlan& plan,
                    const ContentCatalog& catalog, const Vector& popularities) {
  if (popularities.size() != catalog.contents() ||
      static_cast<Index>(plan.selected.size()) != catalog.contents()) {
    throw InvalidInput("plan, catalog and popularities differ in length");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "content_id,size,predicted_popularity,selected\n" << std::setprecision(17);
  for (Index m = 0; m < catalog.contents(); ++m) {
    out << (m + 1) << ',' << catalog.sizes[m] << ',' << popularities[m] << ','
        << (plan.selected[static_cast<std::size_t>(m)] ? 1 : 0) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace pgp
