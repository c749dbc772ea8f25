#include "phasegen/datasets.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "phasegen/rng.hpp"
#include "phasegen/tensor_io.hpp"

namespace fs = std::filesystem;

namespace phasegen {

std::string manifest_path(const std::string& dir) {
  return (fs::path(dir) / "manifest.tsv").string();
}

void write_manifest(const std::string& dir, const std::vector<DatasetEntry>& entries) {
  fs::create_directories(dir);
  const std::string path = manifest_path(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
  for (const DatasetEntry& e : entries)
    out << e.id << '\t' << e.role << '\t' << e.path << '\n';
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
}

Dataset read_manifest(const std::string& dir) {
  const std::string path = manifest_path(dir);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);

  Dataset ds;
  ds.dir = dir;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) +
                               " does not have 3 tab-separated fields: " + path);
    }
    DatasetEntry e;
    e.id = line.substr(0, t1);
    e.role = line.substr(t1 + 1, t2 - t1 - 1);
    e.path = line.substr(t2 + 1);
    if (e.id.empty())
      throw std::runtime_error("manifest line " + std::to_string(lineno) +
                               " has an empty id: " + path);
    if (!seen.insert(e.id).second)
      throw std::runtime_error("duplicate record id '" + e.id + "' in " + path);
    fs::path p(e.path);
    if (p.is_relative()) p = fs::absolute(fs::path(dir) / p);
    e.path = p.lexically_normal().string();
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

std::string write_record(const std::string& dir, const std::string& id,
                         const ComplexImage& z) {
  fs::create_directories(dir);
  const fs::path p = fs::absolute(fs::path(dir) / (id + ".cxt1")).lexically_normal();
  write_tensor(p.string(), z);
  return p.string();
}

ComplexImage read_record(const DatasetEntry& entry) {
  return read_tensor(entry.path);
}

std::vector<ComplexImage> load_all_records(const Dataset& ds) {
  std::vector<ComplexImage> out;
  out.reserve(ds.entries.size());
  for (const DatasetEntry& e : ds.entries) out.push_back(read_record(e));
  return out;
}

namespace {

std::string absolutized(const std::string& path) {
  return fs::absolute(fs::path(path)).lexically_normal().string();
}

}  // namespace

Dataset mix_datasets(const Dataset& synthetic, const Dataset& real, const MixSpec& spec) {
  if (!(spec.real_fraction >= 0.0 && spec.real_fraction <= 1.0))
    throw std::invalid_argument("real fraction must lie in [0, 1]");

  Dataset out;
  if (spec.real_fraction == 1.0) {
    out.entries = real.entries;
    for (DatasetEntry& e : out.entries) {
      e.role = "real";
      e.path = absolutized(e.path);
    }
    return out;
  }
  if (spec.real_fraction == 0.0) {
    out.entries = synthetic.entries;
    for (DatasetEntry& e : out.entries) {
      e.role = "synthetic";
      e.path = absolutized(e.path);
    }
    return out;
  }

  const size_t total = synthetic.entries.size();
  const size_t want = static_cast<size_t>(
      std::llround(spec.real_fraction * static_cast<double>(total)));
  if (want > real.entries.size()) {
    throw std::invalid_argument(
        "mix fraction demands " + std::to_string(want) +
        " real records but only " + std::to_string(real.entries.size()) + " exist");
  }

  // Partial Fisher-Yates: the first `want` slots end up holding a uniform
  // sample of real indices without shuffling the rest.
  std::vector<size_t> order(real.entries.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(spec.seed);
  for (size_t i = 0; i < want; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }

  std::unordered_set<std::string> synthetic_ids;
  for (const DatasetEntry& e : synthetic.entries) synthetic_ids.insert(e.id);

  std::unordered_map<std::string, const DatasetEntry*> chosen;
  for (size_t i = 0; i < want; ++i) {
    const DatasetEntry& e = real.entries[order[i]];
    if (!synthetic_ids.count(e.id))
      throw std::runtime_error("real record '" + e.id +
                               "' has no synthetic counterpart to replace");
    chosen[e.id] = &e;
  }

  out.entries.reserve(total);
  for (const DatasetEntry& e : synthetic.entries) {
    auto it = chosen.find(e.id);
    DatasetEntry mixed = it != chosen.end() ? *it->second : e;
    mixed.role = it != chosen.end() ? "real" : "synthetic";
    mixed.path = absolutized(mixed.path);
    out.entries.push_back(std::move(mixed));
  }
  return out;
}

}  // namespace phasegen
