#ifndef DUALRNN_CHECKPOINT_HPP
#define DUALRNN_CHECKPOINT_HPP

#include <string>

#include "dualrnn/config.hpp"
#include "dualrnn/model.hpp"

namespace dualrnn {

// Versioned binary container: config echo, named parameter tensors as
// little-endian f32, and the RNG state. Self-describing enough to rebuild
// the model without the original config file.
void save_checkpoint(const std::string& path, Model<float>& model, const RunConfig& cfg);

// Rebuilds the model from the embedded config and restores every parameter
// and the RNG position. The echoed run configuration is returned through
// `echoed` when non-null.
Model<float> load_checkpoint(const std::string& path, RunConfig* echoed = nullptr);

}  // namespace dualrnn

#endif  // DUALRNN_CHECKPOINT_HPP
