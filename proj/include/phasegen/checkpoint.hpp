#pragma once

#include <string>

#include "phasegen/cvnn.hpp"

namespace phasegen {

// Writes every parameter tensor as a CXT1 file under `dir` plus a params.tsv
// manifest with one `name<TAB>shape<TAB>file` line per tensor, in parameter
// order.  Shapes are written as `d0xd1x...`.  Reload is bit-exact.
void save_checkpoint(const cvnn::ParamSet<float>& params, const std::string& dir);

// Rebuilds a parameter set from a checkpoint directory.
cvnn::ParamSet<float> load_checkpoint(const std::string& dir);

// Loads a checkpoint into an existing layout; tensor order, names, shapes,
// and kinds must all match or the load is rejected.
void load_checkpoint_into(cvnn::ParamSet<float>& params, const std::string& dir);

}  // namespace phasegen
