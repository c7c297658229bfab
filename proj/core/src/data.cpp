#include "opal/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "opal/error.hpp"

namespace opal {

int Catalog::intern(const std::string& id) {
  auto it = index.find(id);
  if (it != index.end()) return it->second;
  const int idx = static_cast<int>(ids.size());
  ids.push_back(id);
  index.emplace(id, idx);
  return idx;
}

int Catalog::lookup(const std::string& id) const {
  auto it = index.find(id);
  return it == index.end() ? -1 : it->second;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::int64_t parse_timestamp(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw IoError("line " + std::to_string(line_no) +
                  ": timestamp is not an integer: '" + s + "'");
  }
  return v;
}

std::vector<Interaction> ingest_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: " + file.string());
  const auto header = split_csv_line(line);

  int col_user = -1, col_item = -1, col_ts = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "user_id") col_user = static_cast<int>(i);
    if (header[i] == "item_id") col_item = static_cast<int>(i);
    if (header[i] == "timestamp") col_ts = static_cast<int>(i);
  }
  if (col_user < 0 || col_item < 0 || col_ts < 0) {
    throw SchemaError(file.string() +
                      ": header must contain user_id, item_id, timestamp");
  }

  std::vector<Interaction> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError("line " + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " fields, got " +
                    std::to_string(fields.size()));
    }
    Interaction r;
    r.user_id = fields[col_user];
    r.item_id = fields[col_item];
    if (r.user_id.empty() || r.item_id.empty()) {
      throw IoError("line " + std::to_string(line_no) + ": empty id");
    }
    r.timestamp = parse_timestamp(fields[col_ts], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string json_id(const nlohmann::json& v, const char* key,
                    std::size_t line_no) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw IoError("line " + std::to_string(line_no) + ": " + key +
                " must be a string or integer");
}

std::vector<Interaction> ingest_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());

  std::vector<Interaction> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.contains("user_id") || !obj.contains("item_id") ||
        !obj.contains("timestamp")) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": record must contain user_id, item_id, timestamp");
    }
    Interaction r;
    r.user_id = json_id(obj["user_id"], "user_id", line_no);
    r.item_id = json_id(obj["item_id"], "item_id", line_no);
    if (!obj["timestamp"].is_number_integer()) {
      throw IoError("line " + std::to_string(line_no) +
                    ": timestamp must be an integer");
    }
    r.timestamp = obj["timestamp"].get<std::int64_t>();
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::vector<Interaction> ingest(const std::filesystem::path& file,
                                LogFormat format) {
  auto rows =
      format == LogFormat::csv ? ingest_csv(file) : ingest_jsonl(file);

  // Earliest-wins dedup per (user, item), preserving first-appearance order.
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<Interaction> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    const std::string key = r.user_id + '\x1f' + r.item_id;
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, out.size());
      out.push_back(std::move(r));
    } else if (r.timestamp < out[it->second].timestamp) {
      out[it->second].timestamp = r.timestamp;
    }
  }
  return out;
}

std::vector<std::unordered_set<int>> DatasetSplit::train_interacted() const {
  std::vector<std::unordered_set<int>> sets(user_ids.size());
  for (const auto& seq : train) {
    sets[seq.user].insert(seq.items.begin(), seq.items.end());
  }
  return sets;
}

DatasetSplit build_split(const std::vector<Interaction>& interactions,
                         std::int64_t day_length) {
  if (interactions.empty()) throw ConfigError("no interactions to split");
  if (day_length <= 0) throw ConfigError("day_length must be positive");

  std::int64_t t_min = interactions.front().timestamp;
  std::int64_t t_max = interactions.front().timestamp;
  for (const auto& r : interactions) {
    t_min = std::min(t_min, r.timestamp);
    t_max = std::max(t_max, r.timestamp);
  }
  if (t_max - t_min < 2 * day_length) {
    throw ConfigError("interactions span fewer than 3 day windows (" +
                      std::to_string(t_max - t_min) + " < " +
                      std::to_string(2 * day_length) + ")");
  }
  const std::int64_t test_start = t_max - day_length;       // t >  test_start
  const std::int64_t val_start = t_max - 2 * day_length;    // t >  val_start

  DatasetSplit split;
  std::unordered_map<std::string, int> user_index;
  struct Row {
    int item;
    std::int64_t ts;
  };
  std::vector<std::vector<Row>> per_user;

  for (const auto& r : interactions) {
    const int item = split.items.intern(r.item_id);
    auto [it, inserted] =
        user_index.emplace(r.user_id, static_cast<int>(split.user_ids.size()));
    if (inserted) {
      split.user_ids.push_back(r.user_id);
      per_user.emplace_back();
    }
    per_user[it->second].push_back({item, r.timestamp});
  }

  for (int u = 0; u < static_cast<int>(per_user.size()); ++u) {
    auto& rows = per_user[u];
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.item < b.item;
    });

    Sequence train_seq;
    train_seq.user = u;
    std::vector<int> val_truth, test_truth;
    std::vector<int> val_history;
    std::vector<std::int64_t> val_history_ts;

    for (const auto& row : rows) {
      if (row.ts <= val_start) {
        train_seq.items.push_back(row.item);
        train_seq.timestamps.push_back(row.ts);
      } else if (row.ts <= test_start) {
        val_truth.push_back(row.item);
      } else {
        test_truth.push_back(row.item);
      }
    }

    if (!train_seq.items.empty()) split.train.push_back(train_seq);

    if (!train_seq.items.empty() && !val_truth.empty()) {
      EvalRecord rec;
      rec.user = u;
      rec.history = train_seq.items;
      rec.history_timestamps = train_seq.timestamps;
      rec.truth = val_truth;
      split.val.push_back(std::move(rec));
    }

    // Test history = train + val interactions of the user.
    std::vector<int> test_history = train_seq.items;
    std::vector<std::int64_t> test_history_ts = train_seq.timestamps;
    for (const auto& row : rows) {
      if (row.ts > val_start && row.ts <= test_start) {
        test_history.push_back(row.item);
        test_history_ts.push_back(row.ts);
      }
    }
    if (!test_history.empty() && !test_truth.empty()) {
      EvalRecord rec;
      rec.user = u;
      rec.history = std::move(test_history);
      rec.history_timestamps = std::move(test_history_ts);
      rec.truth = std::move(test_truth);
      split.test.push_back(std::move(rec));
    }
  }
  return split;
}

bool sample_instance(const Sequence& seq, const SamplerConfig& cfg, Rng& rng,
                     TrainInstance& out) {
  const int n = static_cast<int>(seq.items.size());
  if (n < cfg.min_history + 1) return false;

  // t = history length, in [min_history, n-1]; positions are 1-based.
  const int t = static_cast<int>(rng.uniform_int(cfg.min_history, n - 1));
  const int fut_end =
      cfg.future_window <= 0 ? n : std::min(n, t + cfg.future_window);
  const int pos_idx = static_cast<int>(rng.uniform_int(t, fut_end - 1));

  out.user = seq.user;
  out.positive = seq.items[pos_idx];
  const int start = std::max(0, t - cfg.l_max);
  out.history.assign(seq.items.begin() + start, seq.items.begin() + t);
  return true;
}

TrainBatch make_batch(std::vector<TrainInstance> instances,
                      const std::vector<std::unordered_set<int>>& interacted,
                      int catalog_size, Rng& rng) {
  if (instances.empty()) throw ConfigError("empty batch");

  TrainBatch batch;
  batch.shared_negatives.reserve(instances.size());
  constexpr int kMaxRejects = 10000;

  for (const auto& inst : instances) {
    const auto& pos_set = interacted.at(inst.user);
    if (static_cast<int>(pos_set.size()) >= catalog_size) {
      throw DivergenceError("user " + std::to_string(inst.user) +
                            " interacted with the whole catalog; cannot "
                            "sample a negative");
    }
    // Rejection sampling is cheap while the complement is large; fall back to
    // an explicit complement draw when it is not.
    int neg = -1;
    if (pos_set.size() * 2 < static_cast<std::size_t>(catalog_size)) {
      for (int tries = 0; tries < kMaxRejects; ++tries) {
        const int cand = static_cast<int>(rng.uniform_index(catalog_size));
        if (!pos_set.count(cand)) {
          neg = cand;
          break;
        }
      }
      if (neg < 0) {
        throw DivergenceError("negative sampling exceeded retry bound");
      }
    } else {
      std::vector<int> complement;
      complement.reserve(catalog_size - pos_set.size());
      for (int i = 0; i < catalog_size; ++i) {
        if (!pos_set.count(i)) complement.push_back(i);
      }
      neg = complement[rng.uniform_index(complement.size())];
    }
    batch.shared_negatives.push_back(neg);
  }
  batch.instances = std::move(instances);
  return batch;
}

void SyntheticSpec::validate() const {
  if (n_users < 1) throw ConfigError("n_users must be >= 1");
  if (n_items < 1) throw ConfigError("n_items must be >= 1");
  if (k_true < 1) throw ConfigError("k_true must be >= 1");
  if (n_items < k_true) throw ConfigError("n_items must be >= k_true");
  if (len_min < 1 || len_max < len_min) {
    throw ConfigError("need 1 <= len_min <= len_max");
  }
  if (horizon_days < 3) {
    throw ConfigError("horizon_days must be >= 3 for a temporal split");
  }
  if (day_length <= 0) throw ConfigError("day_length must be positive");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Items are block-partitioned into planted categories.
  std::vector<std::pair<int, int>> category_range(spec.k_true);
  SyntheticData out;
  for (int c = 0; c < spec.k_true; ++c) {
    const int lo = static_cast<int>(
        static_cast<std::int64_t>(spec.n_items) * c / spec.k_true);
    const int hi = static_cast<int>(
        static_cast<std::int64_t>(spec.n_items) * (c + 1) / spec.k_true);
    category_range[c] = {lo, hi};
    for (int i = lo; i < hi; ++i) {
      out.planted_labels.emplace("v" + std::to_string(i), c);
    }
  }

  const std::int64_t horizon = spec.horizon_days * spec.day_length;
  for (int u = 0; u < spec.n_users; ++u) {
    auto theta = rng.dirichlet(spec.k_true, spec.alpha);
    const int len =
        static_cast<int>(rng.uniform_int(spec.len_min, spec.len_max));
    for (int pos = 0; pos < len; ++pos) {
      if (spec.drift && pos == len / 2) {
        theta = rng.dirichlet(spec.k_true, spec.alpha);
      }
      // Category from the mixture, then an item uniform within it.
      double x = rng.uniform01();
      int cat = spec.k_true - 1;
      for (int c = 0; c < spec.k_true; ++c) {
        if (x < theta[c]) {
          cat = c;
          break;
        }
        x -= theta[c];
      }
      const auto [lo, hi] = category_range[cat];
      const int item = lo + static_cast<int>(rng.uniform_index(hi - lo));

      Interaction r;
      r.user_id = "u" + std::to_string(u);
      r.item_id = "v" + std::to_string(item);
      r.timestamp = static_cast<std::int64_t>(pos + 1) * horizon / len;
      out.interactions.push_back(std::move(r));
    }
  }
  return out;
}

void write_interactions_csv(const std::vector<Interaction>& rows,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "user_id,item_id,timestamp\n";
  for (const auto& r : rows) {
    out << r.user_id << ',' << r.item_id << ',' << r.timestamp << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_labels_csv(const std::unordered_map<std::string, int>& labels,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "item_id,category\n";
  std::map<std::string, int> sorted(labels.begin(), labels.end());
  for (const auto& [id, cat] : sorted) out << id << ',' << cat << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::unordered_map<std::string, int> read_labels_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file: " + path.string());
  std::unordered_map<std::string, int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) {
      throw IoError("line " + std::to_string(line_no) + ": expected 2 fields");
    }
    labels[fields[0]] = static_cast<int>(parse_timestamp(fields[1], line_no));
  }
  return labels;
}

}  // namespace opal
