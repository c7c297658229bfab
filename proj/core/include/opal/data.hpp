#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "opal/rng.hpp"

namespace opal {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

enum class LogFormat { csv, jsonl };

// Dense id <-> external string id mapping, in first-appearance order.
struct Catalog {
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> index;

  int intern(const std::string& id);
  int lookup(const std::string& id) const;  // -1 if unknown
  int size() const { return static_cast<int>(ids.size()); }
};

// Chronological per-user interaction sequence over dense item indices.
struct Sequence {
  int user = -1;
  std::vector<int> items;
  std::vector<std::int64_t> timestamps;
};

// One evaluation user: everything before the window is history, the window
// itself is ground truth.
struct EvalRecord {
  int user = -1;
  std::vector<int> history;
  std::vector<std::int64_t> history_timestamps;
  std::vector<int> truth;
};

struct DatasetSplit {
  Catalog items;
  std::vector<std::string> user_ids;
  std::vector<Sequence> train;
  std::vector<EvalRecord> val;
  std::vector<EvalRecord> test;

  int catalog_size() const { return items.size(); }

  // user -> set of train-split items, for negative sampling.
  std::vector<std::unordered_set<int>> train_interacted() const;
};

struct TrainInstance {
  int user = -1;
  std::vector<int> history;
  int positive = -1;
};

struct TrainBatch {
  std::vector<TrainInstance> instances;
  std::vector<int> shared_negatives;  // one per instance, shared batch-wide
};

struct SamplerConfig {
  int min_history = 1;
  int future_window = 0;  // 0 = the whole remaining sequence
  int l_max = 200;
};

struct SyntheticSpec {
  int n_users = 500;
  int n_items = 2000;
  int k_true = 4;          // planted hyper-categories
  double alpha = 0.5;      // Dirichlet concentration; <= 0 = exactly uniform mixture
  int len_min = 80;
  int len_max = 120;
  int horizon_days = 10;   // sequence timestamps spread over this many days
  std::int64_t day_length = 86400;
  bool drift = false;      // re-draw the mixture at the sequence midpoint
  std::uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

// Parses a user_id,item_id,timestamp log. Duplicate (user, item) pairs keep
// the earliest timestamp. Throws IoError / SchemaError with line numbers.
std::vector<Interaction> ingest(const std::filesystem::path& file, LogFormat format);

// Strict temporal split: the day window ending at the max timestamp is test
// truth, the one before it val truth, the rest train. Test histories include
// the val window.
DatasetSplit build_split(const std::vector<Interaction>& interactions,
                         std::int64_t day_length);

// Draws the split point t uniformly, then the positive uniformly from the
// future window; history is the most recent l_max items before t.
// Returns false when the sequence is too short to sample from.
bool sample_instance(const Sequence& seq, const SamplerConfig& cfg, Rng& rng,
                     TrainInstance& out);

// One uniform negative per instance, drawn from items the instance's user
// never interacted with in the train split; all negatives are shared across
// the batch.
TrainBatch make_batch(std::vector<TrainInstance> instances,
                      const std::vector<std::unordered_set<int>>& interacted,
                      int catalog_size, Rng& rng);

struct SyntheticData {
  std::vector<Interaction> interactions;
  std::unordered_map<std::string, int> planted_labels;  // item id -> category
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Sidecar `item_id,category` CSV next to the interaction log.
void write_interactions_csv(const std::vector<Interaction>& rows,
                            const std::filesystem::path& path);
void write_labels_csv(const std::unordered_map<std::string, int>& labels,
                      const std::filesystem::path& path);
std::unordered_map<std::string, int> read_labels_csv(
    const std::filesystem::path& path);

}  // namespace opal
