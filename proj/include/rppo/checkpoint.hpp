#pragma once

#include <string>

#include "rppo/gmm.hpp"

namespace rppo {

// Plain-text mixture checkpoint: dimensions, logits, and each augmented
// component as its lower triangle, row major, 17 significant digits. Values
// survive a write/read cycle bit for bit.
void write_checkpoint(const std::string& path, const GmmParams& g);
GmmParams read_checkpoint(const std::string& path);

std::string checkpoint_to_text(const GmmParams& g);
GmmParams checkpoint_from_text(const std::string& text);

}  // namespace rppo
