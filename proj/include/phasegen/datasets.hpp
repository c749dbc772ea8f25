#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phasegen/image.hpp"

namespace phasegen {

// One manifest row.  `role` records provenance ("real" for measured or
// phantom ground truth, "synthetic" for sampler output); `path` locates the
// record's CXT1 payload.
struct DatasetEntry {
  std::string id;
  std::string role;
  std::string path;
};

struct Dataset {
  std::string dir;  // directory the manifest lives in; may be empty for
                    // in-memory datasets such as mix_datasets output
  std::vector<DatasetEntry> entries;
};

// Manifest format: one record per line, `id<TAB>role<TAB>path`.
std::string manifest_path(const std::string& dir);
void write_manifest(const std::string& dir, const std::vector<DatasetEntry>& entries);

// Reads dir/manifest.tsv.  Relative record paths are resolved against dir,
// so returned entries always carry absolute paths.  Rejects rows that do
// not have exactly three tab-separated fields and duplicate ids.
Dataset read_manifest(const std::string& dir);

// Writes dir/<id>.cxt1 and returns the absolute path written.
std::string write_record(const std::string& dir, const std::string& id,
                         const ComplexImage& z);
ComplexImage read_record(const DatasetEntry& entry);
std::vector<ComplexImage> load_all_records(const Dataset& ds);

struct MixSpec {
  double real_fraction = 0.0;
  uint64_t seed = 0;
};

// Blends a synthetic dataset with measured records sharing the same ids.
// fraction 0 returns the synthetic set, fraction 1 the real set.  Otherwise
// round(fraction * |synthetic|) real records are chosen by seeded shuffle
// and substituted for their synthetic counterparts in place, so the output
// keeps the synthetic ordering and size.  Every chosen real id must exist
// in the synthetic set.
Dataset mix_datasets(const Dataset& synthetic, const Dataset& real,
                     const MixSpec& spec);

}  // namespace phasegen
