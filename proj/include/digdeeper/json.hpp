#pragma once

#include <json.hpp>

namespace digdeeper {

// Insertion-ordered so every file we write has a stable key order.
using Json = nlohmann::ordered_json;

}  // namespace digdeeper
