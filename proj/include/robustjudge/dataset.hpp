#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "robustjudge/domain.hpp"
#include "robustjudge/rng.hpp"

namespace robustjudge {

// One JSON object per line, fields exactly as TaskRecord. Source corpora are
// prepared upstream; the loader only validates and samples.

struct DatasetManifest {
  struct FileEntry {
    TaskId task_id = TaskId::T1;
    std::string path;
  };
  std::vector<FileEntry> files;
  std::map<TaskId, std::size_t> sample_sizes;  // absent task = take all
  std::uint64_t seed = 0;
};

inline std::vector<TaskRecord> load_task_file(const std::string& path,
                                              TaskId expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::vector<TaskRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) +
                        ": bad JSON: " + e.what());
    }
    TaskRecord rec;
    try {
      rec = validate_task_record(j);
    } catch (const Error& e) {
      throw SchemaError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (rec.task_id != expected)
      throw SchemaError(path + ":" + std::to_string(lineno) +
                        ": record task " + to_string(rec.task_id) +
                        " does not match manifest task " + to_string(expected));
    out.push_back(std::move(rec));
  }
  return out;
}

// Seeded selection: Fisher-Yates shuffle, take the first n, re-sort to input
// order. Deterministic for (records order, n, seed) on every toolchain.
inline std::vector<TaskRecord> sample_subset(
    const std::vector<TaskRecord>& records, std::size_t n,
    std::uint64_t seed) {
  const std::vector<std::size_t> idx = sample_indices(records.size(), n, seed);
  std::vector<TaskRecord> out;
  out.reserve(n);
  for (std::size_t i : idx) out.push_back(records[i]);
  return out;
}

// Loads every manifest file, applies per-task sampling, returns records
// grouped by task in file order.
inline std::vector<TaskRecord> load_tasks(const DatasetManifest& manifest) {
  std::map<TaskId, std::vector<TaskRecord>> by_task;
  std::vector<TaskId> task_order;
  for (const auto& f : manifest.files) {
    std::vector<TaskRecord> recs = load_task_file(f.path, f.task_id);
    auto& bucket = by_task[f.task_id];
    if (bucket.empty()) task_order.push_back(f.task_id);
    bucket.insert(bucket.end(), recs.begin(), recs.end());
  }
  std::vector<TaskRecord> out;
  for (TaskId t : task_order) {
    auto& bucket = by_task[t];
    auto it = manifest.sample_sizes.find(t);
    if (it != manifest.sample_sizes.end() && it->second < bucket.size()) {
      SeedMixer mix(manifest.seed);
      mix.feed(to_string(t));
      bucket = sample_subset(bucket, it->second, mix.value());
    } else if (it != manifest.sample_sizes.end() &&
               it->second > bucket.size()) {
      throw SampleTooLarge(std::string("manifest asks for ") +
                           std::to_string(it->second) + " " + to_string(t) +
                           " records, file has " +
                           std::to_string(bucket.size()));
    }
    out.insert(out.end(), bucket.begin(), bucket.end());
  }
  return out;
}

inline void write_tasks_jsonl(const std::string& path,
                              const std::vector<TaskRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const TaskRecord& r : records) out << task_record_to_json(r).dump() << "\n";
}

}  // namespace robustjudge
