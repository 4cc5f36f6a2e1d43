#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hybrec/graph.hpp"
#include "hybrec/model.hpp"

namespace hybrec {

inline constexpr double kPositiveThreshold = 4.0;

// Rating files with one `user<sep>item<sep>rating<sep>timestamp` record per
// line. The separator is detected per line: "::" if present, else tab, else
// comma. A leading non-numeric header line is skipped. Only ratings >= the
// threshold are returned (weight = rating). Throws DataError naming the line
// for malformed records and for files without any record.
std::vector<Interaction> load_movielens(const std::filesystem::path& path, double threshold = kPositiveThreshold);

struct ReviewRecord {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::int64_t timestamp = 0;
  std::string text;
};

struct ReviewData {
  std::vector<ReviewRecord> records;             // file order
  std::map<std::string, std::string> item_text;  // texts joined by a single space, file order
  std::map<std::string, std::vector<double>> item_ratings;
  std::size_t lines = 0;    // non-blank lines seen
  std::size_t skipped = 0;  // unparseable lines
};

// Newline-delimited JSON reviews in either the Amazon schema (reviewerID,
// asin, reviewText, overall, unixReviewTime) or the Yelp schema (user_id,
// business_id, text, stars, date). Missing text reads as "". Lines that are
// not JSON objects or lack an item id are skipped and counted; more than 10%
// skipped is a DataError.
ReviewData load_json_reviews(const std::filesystem::path& path);

// Interactions plus item text keyed by external item id.
struct Dataset {
  std::vector<Interaction> interactions;
  std::map<std::int64_t, std::string> item_text;
};

// Review records with rating >= threshold become interactions. String ids are
// numbered in order of first appearance.
Dataset reviews_to_dataset(const ReviewData& reviews, double threshold = kPositiveThreshold);

struct SplitDataset {
  std::vector<Interaction> train;
  std::vector<Interaction> test;  // one held-out positive per evaluated user, ascending user id
  std::map<std::int64_t, std::string> item_text;
};

// Per user, repeated (user, item) pairs collapse to their latest occurrence;
// the latest interaction (ties: larger item id) is held out when the user has
// at least two distinct items, everything else trains.
SplitDataset split_leave_one_out(const Dataset& data);

struct SyntheticConfig {
  std::size_t n_users = 5000;
  std::size_t n_items = 2000;
  std::size_t clusters = 10;
  double p_in = 0.9;            // interaction stays inside the user's cluster
  double text_noise = 0.03;     // item text drawn from a random cluster's keywords
  double fresh_fraction = 0.5;  // items that only ever appear as a user's latest interaction
  std::size_t min_interactions = 6;
  std::size_t max_interactions = 14;
  std::size_t keywords_per_cluster = 4;
  std::size_t keywords_per_item = 5;
  std::size_t filler_words = 2;
  std::size_t filler_vocab = 200;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset data;
  std::vector<std::uint32_t> user_cluster;
  std::vector<std::uint32_t> item_cluster;
  std::vector<std::uint32_t> text_cluster;  // cluster whose keywords the item's text uses
  std::vector<bool> fresh;
};

// Users and items get latent clusters. Users interact mostly inside their
// cluster; item text uses its cluster's keywords except for a `text_noise`
// fraction. Fresh items are only reachable as a user's final interaction,
// so after a leave-one-out split they have no training edges and only text
// describes them. Throws InvalidArgument when either size is below 10.
SyntheticData generate_synthetic(const SyntheticConfig& config);

// Writes `interactions.csv` (comma rating format) and `items.jsonl` (Amazon
// review schema) into `dir`.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

// Reads a data directory: interactions from interactions.csv, ratings.csv or
// ratings.dat, or else from reviews.json; item text from items.jsonl or the
// reviews. Throws DataError when nothing loadable is found.
Dataset load_dataset_dir(const std::filesystem::path& dir, double threshold = kPositiveThreshold);

// Graph, ids and per-node text for a split. Ids span train and test so that
// held-out items keep a (possibly isolated) node.
struct PreparedGraph {
  IdMap ids;
  InteractionGraph graph;
  NodeCorpus corpus;
};

PreparedGraph prepare_graph(const SplitDataset& split);

}  // namespace hybrec
