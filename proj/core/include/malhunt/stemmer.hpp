#pragma once

#include <string>
#include <string_view>

namespace malhunt::textprep {

/// One pass of the Porter (1980) suffix-stripping algorithm, following the
/// reference C implementation (including its "bli"->"ble" and "logi"->"log"
/// departures). Input must be lowercase ASCII; words of length <= 2 are
/// returned unchanged.
std::string porter_stem(std::string_view word);

/// Applies porter_stem until the word stops changing. A single Porter pass
/// is not idempotent ("agreed" -> "agre" -> "agr"); the pipeline needs it to be.
std::string stable_stem(std::string_view word);

}  // namespace malhunt::textprep
