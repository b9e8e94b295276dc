#include "pgp/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "pgp/csv.hpp"
#include "pgp/error.hpp"

namespace pgp::ingest {
namespace {

constexpr long long kDay = 86400;

bool parse_ll(const std::string& s, long long& out) {
  try {
    out = csv::parse_int(s);
    return true;
  } catch (const IoError&) {
    return false;
  }
}

bool parse_real(const std::string& s, double& out) {
  try {
    out = csv::parse_double(s);
    return std::isfinite(out);
  } catch (const IoError&) {
    return false;
  }
}

void expect_header(const csv::Reader& reader, const std::vector<std::string>& want,
                   const std::filesystem::path& path) {
  if (reader.header() != want) {
    std::ostringstream msg;
    msg << path.string() << ": malformed header, expected";
    for (const auto& w : want) msg << ' ' << w;
    throw IoError(msg.str());
  }
}

void check_threshold(std::size_t bad, std::size_t rows, double limit,
                     const std::filesystem::path& path) {
  if (rows > 0 && static_cast<double>(bad) > limit * static_cast<double>(rows)) {
    std::ostringstream msg;
    msg << path.string() << ": " << bad << " of " << rows
        << " rows are malformed, above the allowed fraction " << limit;
    throw IoError(msg.str());
  }
}

long long epoch_of(int year, unsigned month) {
  using namespace std::chrono;
  const sys_days d{std::chrono::year{year} / std::chrono::month{month} / 1};
  return static_cast<long long>(d.time_since_epoch().count()) * kDay;
}

}  // namespace

const std::array<std::string, kGenres>& genre_names() {
  static const std::array<std::string, kGenres> names{
      "Action",  "Adventure", "Animation", "Children", "Comedy",  "Crime",
      "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror", "Musical",
      "Mystery", "Romance",   "Sci-Fi",    "Thriller",  "War",    "Western"};
  return names;
}

Vector genre_vector(const std::string& pipe_separated) {
  Vector v = Vector::Zero(kGenres);
  const auto& names = genre_names();
  std::stringstream ss(pipe_separated);
  std::string token;
  while (std::getline(ss, token, '|')) {
    const auto it = std::find(names.begin(), names.end(), token);
    if (it != names.end()) v[it - names.begin()] = 1.0;
  }
  return v;
}

ParsedMovieLens parse_movielens(const std::filesystem::path& ratings_path,
                                const std::filesystem::path& movies_path,
                                double max_malformed_fraction) {
  ParsedMovieLens out;
  std::vector<std::string> fields;
  bool ok = true;

  {
    csv::Reader reader(movies_path);
    expect_header(reader, {"movieId", "title", "genres"}, movies_path);
    std::size_t rows = 0;
    std::size_t bad = 0;
    while (reader.next(fields, ok)) {
      ++rows;
      long long id = 0;
      if (!ok || fields.size() != 3 || !parse_ll(fields[0], id) ||
          out.movies.count(id) != 0) {
        ++bad;
        continue;
      }
      out.movies.emplace(id, Movie{fields[1], genre_vector(fields[2])});
    }
    check_threshold(bad, rows, max_malformed_fraction, movies_path);
  }

  csv::Reader reader(ratings_path);
  expect_header(reader, {"userId", "movieId", "rating", "timestamp"}, ratings_path);
  RatingsLog& log = out.log;
  log.source_path = ratings_path;
  while (reader.next(fields, ok)) {
    ++log.data_rows;
    Rating r;
    if (!ok || fields.size() != 4 || !parse_ll(fields[0], r.user_id) ||
        !parse_ll(fields[1], r.movie_id) || !parse_real(fields[2], r.rating) ||
        !parse_ll(fields[3], r.timestamp) || r.timestamp < 0 ||
        out.movies.count(r.movie_id) == 0) {
      ++log.malformed;
      continue;
    }
    log.records.push_back(r);
  }
  check_threshold(log.malformed, log.data_rows, max_malformed_fraction, ratings_path);
  return out;
}

void WindowOptions::validate() const {
  if (end_year < start_year) throw InvalidInput("window span end precedes start");
  if (train_days < 1 || eval_days < 1) throw InvalidInput("window lengths must be >= 1 day");
  if (max_seen < 1) throw InvalidInput("max_seen must be >= 1");
  if (!(unseen_fraction >= 0.0)) throw InvalidInput("unseen fraction must be >= 0");
  if (!(content_size > 0.0)) throw InvalidInput("content size must be > 0");
}

WindowResult make_windows(const RatingsLog& log, const MovieTable& movies,
                          const WindowOptions& options) {
  options.validate();
  const int intervals = 6 * (options.end_year - options.start_year + 1);
  std::vector<long long> bounds;
  for (int k = 0; k <= intervals; ++k) {
    const int year = options.start_year + (2 * k) / 12;
    const unsigned month = static_cast<unsigned>((2 * k) % 12 + 1);
    bounds.push_back(epoch_of(year, month));
  }

  struct Counts {
    std::map<long long, std::vector<double>> train;  // movie -> per-day counts
    std::map<long long, double> eval;
    std::size_t events = 0;
  };
  std::vector<Counts> per(static_cast<std::size_t>(intervals));
  std::vector<int> eval_len(static_cast<std::size_t>(intervals));
  for (int k = 0; k < intervals; ++k) {
    const long long days = (bounds[k + 1] - bounds[k]) / kDay;
    eval_len[static_cast<std::size_t>(k)] =
        static_cast<int>(std::clamp<long long>(days - options.train_days, 0, options.eval_days));
  }

  WindowResult result;
  for (const Rating& r : log.records) {
    const auto it = std::upper_bound(bounds.begin(), bounds.end(), r.timestamp);
    if (it == bounds.begin() || it == bounds.end()) {
      ++result.stats.out_of_window;
      continue;
    }
    const auto k = static_cast<std::size_t>(it - bounds.begin() - 1);
    const long long day = (r.timestamp - bounds[k]) / kDay;
    Counts& c = per[k];
    if (day < options.train_days) {
      auto& row = c.train[r.movie_id];
      row.resize(static_cast<std::size_t>(options.train_days), 0.0);
      row[static_cast<std::size_t>(day)] += 1.0;
    } else if (day < options.train_days + eval_len[k]) {
      c.eval[r.movie_id] += 1.0;
    } else {
      ++result.stats.out_of_window;
      continue;
    }
    ++c.events;
  }

  for (int k = 0; k < intervals; ++k) {
    Counts& c = per[static_cast<std::size_t>(k)];
    if (c.train.empty()) {
      result.stats.skipped_windows += c.events;
      std::ostringstream msg;
      msg << "window " << k << " has no training requests; skipped";
      result.warnings.push_back(msg.str());
      continue;
    }

    std::vector<std::pair<long long, double>> ranked;
    for (const auto& [id, row] : c.train) {
      double total = 0.0;
      for (double v : row) total += v;
      ranked.emplace_back(id, total);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    std::set<long long> seen_ids;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (static_cast<int>(i) < options.max_seen) {
        seen_ids.insert(ranked[i].first);
      } else {
        result.stats.dropped_by_cap += static_cast<std::size_t>(ranked[i].second);
      }
    }

    const auto unseen_cap = static_cast<std::size_t>(
        std::lround(options.unseen_fraction * static_cast<double>(seen_ids.size())));
    std::vector<long long> unseen_ids;
    for (const auto& [id, count] : c.eval) {
      if (c.train.count(id) != 0) {
        if (seen_ids.count(id) == 0) result.stats.dropped_by_cap += static_cast<std::size_t>(count);
        continue;
      }
      if (unseen_ids.size() < unseen_cap) {
        unseen_ids.push_back(id);
      } else {
        result.stats.dropped_by_cap += static_cast<std::size_t>(count);
      }
    }

    WindowedDataset w;
    w.window_index = k;
    w.start_epoch = bounds[static_cast<std::size_t>(k)];
    w.eval_days = eval_len[static_cast<std::size_t>(k)];
    const Index seen = static_cast<Index>(seen_ids.size());
    const Index total = seen + static_cast<Index>(unseen_ids.size());
    Matrix train(seen, options.train_days);
    Matrix x(total, kGenres);
    w.eval_counts = Vector::Zero(total);
    Index m = 0;
    for (long long id : seen_ids) {
      const auto& row = c.train.at(id);
      for (int n = 0; n < options.train_days; ++n) {
        train(m, n) = row[static_cast<std::size_t>(n)];
      }
      result.stats.train += static_cast<std::size_t>(train.row(m).sum());
      const auto ev = c.eval.find(id);
      if (ev != c.eval.end()) w.eval_counts[m] = ev->second;
      x.row(m) = movies.at(id).genres.transpose();
      w.movie_ids.push_back(id);
      ++m;
    }
    for (long long id : unseen_ids) {
      w.eval_counts[m] = c.eval.at(id);
      x.row(m) = movies.at(id).genres.transpose();
      w.movie_ids.push_back(id);
      ++m;
    }
    result.stats.eval += static_cast<std::size_t>(w.eval_counts.sum());
    w.train = RequestMatrix(std::move(train));
    w.features = FeatureMatrix(std::move(x));
    std::vector<bool> mask(static_cast<std::size_t>(total), false);
    std::fill(mask.begin(), mask.begin() + seen, true);
    w.catalog = ContentCatalog(Vector::Constant(total, options.content_size), std::move(mask));
    result.windows.push_back(std::move(w));
  }
  return result;
}

SyntheticDataset to_dataset(const WindowedDataset& window) {
  SyntheticDataset ds;
  ds.features = window.features;
  ds.requests = window.train;
  ds.future = RequestMatrix(Matrix(window.eval_counts));
  const double days = std::max(window.eval_days, 1);
  ds.true_popularities = window.eval_counts / days;
  ds.true_lambdas = ds.true_popularities.unaryExpr([](double r) {
    return r > 0.0 ? std::log(r) : -std::numeric_limits<double>::infinity();
  });
  ds.catalog = window.catalog;
  return ds;
}

}  // namespace pgp::ingest
