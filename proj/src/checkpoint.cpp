#include "phasegen/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "phasegen/tensor_io.hpp"

namespace phasegen {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "params.tsv";

std::string shape_string(const std::vector<size_t>& dims) {
  std::string s;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(dims[i]);
  }
  return s;
}

std::string tensor_filename(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%04zu.cxt1", index);
  return buf;
}

struct ManifestRow {
  std::string name;
  std::string shape;
  std::string file;
};

std::vector<ManifestRow> read_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / kManifestName;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw std::runtime_error("malformed line " + std::to_string(lineno) + " in " + path.string());
    rows.push_back({line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                    line.substr(tab2 + 1)});
  }
  return rows;
}

}  // namespace

void save_checkpoint(const cvnn::ParamSet<float>& params, const std::string& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  for (size_t i = 0; i < params.items.size(); ++i) {
    const auto& it = params.items[i];
    TensorData t;
    t.dtype = it.complex_valued ? TensorDtype::complex64 : TensorDtype::real32;
    t.dims.assign(it.dims.begin(), it.dims.end());
    t.values = it.values;
    const std::string file = tensor_filename(i);
    write_tensor_file((fs::path(dir) / file).string(), t);
    manifest << it.name << '\t' << shape_string(it.dims) << '\t' << file << '\n';
  }
  const fs::path mpath = fs::path(dir) / kManifestName;
  std::ofstream out(mpath, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint manifest " + mpath.string());
  out << manifest.str();
  if (!out.flush()) throw std::runtime_error("write failed for " + mpath.string());
}

cvnn::ParamSet<float> load_checkpoint(const std::string& dir) {
  cvnn::ParamSet<float> params;
  for (const auto& row : read_manifest(dir)) {
    const TensorData t = read_tensor_file((fs::path(dir) / row.file).string());
    cvnn::ParamTensor<float> item;
    item.name = row.name;
    item.dims.assign(t.dims.begin(), t.dims.end());
    item.complex_valued = t.dtype == TensorDtype::complex64;
    item.values = t.values;
    if (shape_string(item.dims) != row.shape)
      throw std::runtime_error("checkpoint tensor " + row.name + " has shape " +
                               shape_string(item.dims) + ", manifest says " + row.shape);
    params.items.push_back(std::move(item));
  }
  return params;
}

void load_checkpoint_into(cvnn::ParamSet<float>& params, const std::string& dir) {
  cvnn::ParamSet<float> loaded = load_checkpoint(dir);
  if (loaded.items.size() != params.items.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(loaded.items.size()) +
                             " tensors, model expects " + std::to_string(params.items.size()));
  for (size_t i = 0; i < params.items.size(); ++i) {
    auto& dst = params.items[i];
    auto& src = loaded.items[i];
    if (src.name != dst.name || src.dims != dst.dims || src.complex_valued != dst.complex_valued)
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " (" + src.name +
                               ") does not match model tensor " + dst.name);
    dst.values = std::move(src.values);
  }
}

}  // namespace phasegen
