#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pgp/cache.hpp"
#include "pgp/datagen.hpp"

namespace pgp::ingest {

constexpr int kGenres = 18;

/// Action, Adventure, ..., Western in the MovieLens order. Other tokens
/// (IMAX, "(no genres listed)") set no indicator.
const std::array<std::string, kGenres>& genre_names();
Vector genre_vector(const std::string& pipe_separated);

struct Rating {
  long long user_id = 0;
  long long movie_id = 0;
  double rating = 0.0;
  long long timestamp = 0;  // seconds since the epoch, UTC
};

struct Movie {
  std::string title;
  Vector genres;  // kGenres indicators
};

struct RatingsLog {
  std::vector<Rating> records;
  std::filesystem::path source_path;
  std::size_t data_rows = 0;  // rows after the header
  std::size_t malformed = 0;  // skipped rows, including unknown movie ids
};

using MovieTable = std::map<long long, Movie>;

struct ParsedMovieLens {
  RatingsLog log;
  MovieTable movies;
};

/// ratings.csv (userId,movieId,rating,timestamp) and movies.csv
/// (movieId,title,genres). Malformed rows are skipped; more than
/// `max_malformed_fraction` of them in either file throws IoError.
ParsedMovieLens parse_movielens(const std::filesystem::path& ratings_path,
                                const std::filesystem::path& movies_path,
                                double max_malformed_fraction = 0.01);

struct WindowOptions {
  int start_year = 2010;
  int end_year = 2011;  // inclusive
  int train_days = 30;
  int eval_days = 30;
  int max_seen = 500;
  double unseen_fraction = 0.25;
  double content_size = 1.0;

  void validate() const;
};

/// One bimonthly interval: daily training counts of the seen movies, and
/// evaluation totals of every content (seen first, then unseen).
struct WindowedDataset {
  int window_index = 0;
  long long start_epoch = 0;  // first second of the interval
  int eval_days = 0;          // may be shorter than requested for short intervals
  RequestMatrix train;
  Vector eval_counts;
  FeatureMatrix features;
  std::vector<long long> movie_ids;
  ContentCatalog catalog;

  Index seen_count() const noexcept { return train.contents(); }
};

/// Where every parsed rating ended up.
struct WindowStats {
  std::size_t train = 0;
  std::size_t eval = 0;
  std::size_t dropped_by_cap = 0;
  std::size_t out_of_window = 0;
  std::size_t skipped_windows = 0;  // events of windows without training data

  std::size_t accounted() const {
    return train + eval + dropped_by_cap + out_of_window + skipped_windows;
  }
};

struct WindowResult {
  std::vector<WindowedDataset> windows;
  WindowStats stats;
  std::vector<std::string> warnings;
};

/// Interval k covers two calendar months starting at month 2k of the span
/// (UTC). Training is days [0, train_days) of the interval and evaluation
/// days [train_days, train_days + eval_days), cut at the interval end so no
/// event is counted twice. Seen = movies with a training request, top
/// max_seen by training count (ties by movie id). Unseen = movies requested
/// only during evaluation, the lowest round(unseen_fraction * seen) ids.
WindowResult make_windows(const RatingsLog& log, const MovieTable& movies,
                          const WindowOptions& options = {});

/// Dump-format view: popularity is evaluation requests per day and lambda
/// its logarithm (-inf for zero).
SyntheticDataset to_dataset(const WindowedDataset& window);

}  // namespace pgp::ingest
