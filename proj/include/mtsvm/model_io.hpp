#pragma once

#include <string>

#include "mtsvm/mtl.hpp"

namespace mtsvm {

// Versioned JSON model files. save_model writes the whole model including
// support vectors; load_model throws ParseError on malformed or
// wrong-version input.
void save_model(const MtlModel& model, const std::string& path);
MtlModel load_model(const std::string& path);

}  // namespace mtsvm
