#pragma once

#include "malhunt/types.hpp"

#include <string_view>

// Built-in copies of the editable data files under data/ and keywords/,
// embedded at build time.
namespace malhunt::resources {

std::string_view stopwords();
std::string_view filename_blacklist();
std::string_view taxonomy_json();
std::string_view keywords(QueryTier tier);

}  // namespace malhunt::resources
