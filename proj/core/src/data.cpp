#include "hybrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "hybrec/errors.hpp"
#include "hybrec/rng.hpp"

namespace hybrec {

namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + sep.size();
  }
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2 ? 1 : 0;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "YYYY-MM-DD" optionally followed by " HH:MM:SS".
std::int64_t parse_date(std::string_view s) {
  if (s.size() < 10) return 0;
  const auto y = parse_number<std::int64_t>(s.substr(0, 4));
  const auto mo = parse_number<unsigned>(s.substr(5, 2));
  const auto d = parse_number<unsigned>(s.substr(8, 2));
  if (!y || !mo || !d) return 0;
  std::int64_t t = days_from_civil(*y, *mo, *d) * 86400;
  if (s.size() >= 19) {
    const auto hh = parse_number<std::int64_t>(s.substr(11, 2));
    const auto mm = parse_number<std::int64_t>(s.substr(14, 2));
    const auto ss = parse_number<std::int64_t>(s.substr(17, 2));
    if (hh && mm && ss) t += *hh * 3600 + *mm * 60 + *ss;
  }
  return t;
}

const nlohmann::json* field(const nlohmann::json& obj, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    auto it = obj.find(name);
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::optional<std::string> as_id(const nlohmann::json* v) {
  if (v == nullptr) return std::nullopt;
  if (v->is_string()) return v->get<std::string>();
  if (v->is_number_integer()) return std::to_string(v->get<std::int64_t>());
  return std::nullopt;
}

}  // namespace

std::vector<Interaction> load_movielens(const fs::path& path, double threshold) {
  std::ifstream in = open_or_throw(path);
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const std::string_view sep = view.find("::") != std::string_view::npos ? "::"
                                 : view.find('\t') != std::string_view::npos ? "\t"
                                                                             : ",";
    const auto fields = split_on(view, sep);
    const auto user = fields.size() == 4 ? parse_number<std::int64_t>(fields[0]) : std::nullopt;
    const auto item = fields.size() == 4 ? parse_number<std::int64_t>(fields[1]) : std::nullopt;
    const auto rating = fields.size() == 4 ? parse_number<double>(fields[2]) : std::nullopt;
    const auto ts = fields.size() == 4 ? parse_number<std::int64_t>(fields[3]) : std::nullopt;
    if (!user || !item || !rating || !ts) {
      if (records == 0 && line_no == 1 && fields.size() == 4 && !parse_number<double>(fields[0])) continue;  // header
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed rating record");
    }
    ++records;
    if (*rating >= threshold) out.push_back(Interaction{*user, *item, *rating, *ts});
  }
  if (records == 0) throw DataError(path.string() + ": no rating records");
  return out;
}

ReviewData load_json_reviews(const fs::path& path) {
  std::ifstream in = open_or_throw(path);
  ReviewData data;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++data.lines;
    const nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    const auto item = obj.is_object() ? as_id(field(obj, {"asin", "business_id"})) : std::nullopt;
    if (!item) {
      ++data.skipped;
      continue;
    }
    ReviewRecord rec;
    rec.item = *item;
    rec.user = as_id(field(obj, {"reviewerID", "user_id"})).value_or("");
    if (const auto* t = field(obj, {"reviewText", "text"}); t != nullptr && t->is_string()) rec.text = t->get<std::string>();
    const auto* r = field(obj, {"overall", "stars"});
    if (r != nullptr && r->is_number()) rec.rating = r->get<double>();
    if (const auto* ts = field(obj, {"unixReviewTime"}); ts != nullptr && ts->is_number_integer()) {
      rec.timestamp = ts->get<std::int64_t>();
    } else if (const auto* date = field(obj, {"date"}); date != nullptr && date->is_string()) {
      rec.timestamp = parse_date(date->get<std::string>());
    }
    auto [it, inserted] = data.item_text.try_emplace(rec.item, rec.text);
    if (!inserted && !rec.text.empty()) it->second = it->second.empty() ? rec.text : it->second + " " + rec.text;
    if (r != nullptr && r->is_number()) data.item_ratings[rec.item].push_back(rec.rating);
    data.records.push_back(std::move(rec));
  }
  if (data.lines == 0) throw DataError(path.string() + ": no review records");
  if (data.skipped * 10 > data.lines) {
    throw DataError(path.string() + ": " + std::to_string(data.skipped) + " of " + std::to_string(data.lines) +
                    " lines unparseable (limit 10%)");
  }
  return data;
}

Dataset reviews_to_dataset(const ReviewData& reviews, double threshold) {
  Dataset out;
  std::unordered_map<std::string, std::int64_t> users, items;
  const auto id_of = [](std::unordered_map<std::string, std::int64_t>& ids, const std::string& key) {
    return ids.try_emplace(key, static_cast<std::int64_t>(ids.size())).first->second;
  };
  for (const auto& rec : reviews.records) {
    const std::int64_t item = id_of(items, rec.item);
    if (rec.user.empty() || rec.rating < threshold) continue;
    out.interactions.push_back(Interaction{id_of(users, rec.user), item, rec.rating, rec.timestamp});
  }
  for (const auto& [key, text] : reviews.item_text) out.item_text[items.at(key)] = text;
  return out;
}

SplitDataset split_leave_one_out(const Dataset& data) {
  std::map<std::int64_t, std::map<std::int64_t, Interaction>> by_user;
  for (const auto& x : data.interactions) {
    auto [it, inserted] = by_user[x.user].try_emplace(x.item, x);
    if (!inserted && x.timestamp > it->second.timestamp) it->second = x;
  }
  SplitDataset split;
  split.item_text = data.item_text;
  for (auto& [user, items] : by_user) {
    std::vector<Interaction> seq;
    for (const auto& [item, x] : items) seq.push_back(x);
    std::sort(seq.begin(), seq.end(), [](const Interaction& a, const Interaction& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.item < b.item;
    });
    if (seq.size() >= 2) {
      split.test.push_back(seq.back());
      seq.pop_back();
    }
    split.train.insert(split.train.end(), seq.begin(), seq.end());
  }
  return split;
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_users < 10 || cfg.n_items < 10) throw InvalidArgument("generate_synthetic: sizes must be >= 10");
  if (cfg.clusters == 0 || cfg.keywords_per_cluster == 0 || cfg.min_interactions == 0 ||
      cfg.max_interactions < cfg.min_interactions) {
    throw InvalidArgument("generate_synthetic: invalid cluster or interaction-count settings");
  }
  Rng rng(mix_seed(cfg.seed, 0x5e7));
  const auto k = static_cast<std::uint32_t>(cfg.clusters);
  SyntheticData out;
  out.user_cluster.resize(cfg.n_users);
  out.item_cluster.resize(cfg.n_items);
  out.fresh.resize(cfg.n_items);
  for (auto& c : out.user_cluster) c = static_cast<std::uint32_t>(rng.below(k));
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    out.item_cluster[i] = static_cast<std::uint32_t>(rng.below(k));
    out.fresh[i] = rng.bernoulli(cfg.fresh_fraction);
  }
  std::vector<std::vector<std::uint32_t>> old_by_cluster(k), fresh_by_cluster(k);
  std::vector<std::uint32_t> old_items, fresh_items, all_items;
  for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
    (out.fresh[i] ? fresh_by_cluster : old_by_cluster)[out.item_cluster[i]].push_back(i);
    (out.fresh[i] ? fresh_items : old_items).push_back(i);
    all_items.push_back(i);
  }
  // Falls back to wider pools when a narrow one happens to be empty.
  const auto pick = [&](std::initializer_list<const std::vector<std::uint32_t>*> pools) {
    for (const auto* pool : pools) {
      if (!pool->empty()) return (*pool)[rng.below(pool->size())];
    }
    return all_items[rng.below(all_items.size())];
  };

  for (std::uint32_t u = 0; u < cfg.n_users; ++u) {
    const std::uint32_t c = out.user_cluster[u];
    const auto n = cfg.min_interactions + rng.below(cfg.max_interactions - cfg.min_interactions + 1);
    std::vector<std::uint32_t> seen;
    for (std::size_t t = 0; t < n; ++t) {
      const bool last = t + 1 == n;
      std::optional<std::uint32_t> chosen;
      for (int attempt = 0; attempt < 50 && !chosen; ++attempt) {
        std::uint32_t i = 0;
        if (last && rng.bernoulli(cfg.fresh_fraction)) {
          i = rng.bernoulli(cfg.p_in) ? pick({&fresh_by_cluster[c], &fresh_items}) : pick({&fresh_items});
        } else {
          i = rng.bernoulli(cfg.p_in) ? pick({&old_by_cluster[c], &old_items}) : pick({&old_items});
        }
        if (std::find(seen.begin(), seen.end(), i) == seen.end()) chosen = i;
      }
      if (!chosen) continue;
      seen.push_back(*chosen);
      out.data.interactions.push_back(Interaction{u, *chosen, 5.0, static_cast<std::int64_t>(t + 1)});
    }
  }

  out.text_cluster.resize(cfg.n_items);
  for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
    const bool noisy = rng.bernoulli(cfg.text_noise);
    out.text_cluster[i] = noisy ? static_cast<std::uint32_t>(rng.below(k)) : out.item_cluster[i];
    std::string text;
    const auto append = [&](const std::string& word) {
      if (!text.empty()) text += ' ';
      text += word;
    };
    for (std::size_t w = 0; w < cfg.keywords_per_item; ++w) {
      append("topic" + std::to_string(out.text_cluster[i]) + "w" + std::to_string(rng.below(cfg.keywords_per_cluster)));
    }
    for (std::size_t w = 0; w < cfg.filler_words && cfg.filler_vocab > 0; ++w) {
      append("filler" + std::to_string(rng.below(cfg.filler_vocab)));
    }
    out.data.item_text[i] = std::move(text);
  }
  return out;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream ratings(dir / "interactions.csv", std::ios::binary);
  std::ofstream items(dir / "items.jsonl", std::ios::binary);
  if (!ratings || !items) throw DataError("cannot write dataset into " + dir.string());
  ratings << "userId,itemId,rating,timestamp\n";
  for (const auto& x : data.interactions) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x.weight);
    ratings << x.user << ',' << x.item << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << ','
            << x.timestamp << '\n';
  }
  for (const auto& [item, text] : data.item_text) {
    items << nlohmann::json{{"asin", std::to_string(item)}, {"reviewText", text}}.dump() << '\n';
  }
  if (!ratings || !items) throw DataError("failed writing dataset into " + dir.string());
}

Dataset load_dataset_dir(const fs::path& dir, double threshold) {
  Dataset data;
  bool have_interactions = false;
  for (const char* name : {"interactions.csv", "ratings.csv", "ratings.dat"}) {
    if (fs::exists(dir / name)) {
      data.interactions = load_movielens(dir / name, threshold);
      have_interactions = true;
      break;
    }
  }
  if (!have_interactions) {
    for (const char* name : {"reviews.json", "reviews.jsonl"}) {
      if (fs::exists(dir / name)) {
        data = reviews_to_dataset(load_json_reviews(dir / name), threshold);
        have_interactions = true;
        break;
      }
    }
  }
  if (!have_interactions) throw DataError("no interactions.csv, ratings.csv, ratings.dat or reviews.json in " + dir.string());
  if (fs::exists(dir / "items.jsonl")) {
    const ReviewData reviews = load_json_reviews(dir / "items.jsonl");
    for (const auto& [key, text] : reviews.item_text) {
      if (const auto id = parse_number<std::int64_t>(key)) data.item_text[*id] = text;
    }
  }
  return data;
}

PreparedGraph prepare_graph(const SplitDataset& split) {
  std::vector<Interaction> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  PreparedGraph out;
  out.ids = IdMap::from_interactions(all);
  out.graph = build_graph(split.train, out.ids).graph;
  out.corpus.texts.assign(out.graph.num_nodes(), std::string());
  for (std::uint32_t j = 0; j < out.ids.num_items(); ++j) {
    auto it = split.item_text.find(out.ids.external_item(j));
    if (it != split.item_text.end()) out.corpus.texts[out.graph.item_node(j)] = it->second;
  }
  return out;
}

}  // namespace hybrec
