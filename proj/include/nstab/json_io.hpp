#pragma once

// JSON serialization of the library's data types, run manifests, and flat CSV
// emission with full double precision.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "nstab/cube.hpp"
#include "nstab/hermite_analysis.hpp"
#include "nstab/partition.hpp"
#include "nstab/poly_gauss.hpp"
#include "nstab/product_space.hpp"
#include "nstab/search.hpp"
#include "nstab/symmetric_tensor.hpp"

namespace nstab {

using json = nlohmann::json;

json to_json(const HermiteExpansion& e);
HermiteExpansion expansion_from_json(const json& j);

json to_json(const SymmetricTensor& t);
SymmetricTensor tensor_from_json(const json& j);

json to_json(const PolyGauss& p);
PolyGauss poly_from_json(const json& j);

json to_json(const CubeFn& f);
CubeFn cube_from_json(const json& j);

/// {kind, k, n, payload}; callback partitions are not serializable.
json to_json(const PartitionFn& f);
PartitionFn partition_from_json(const json& j);

json to_json(const JointDist& P);
JointDist joint_from_json(const json& j);

json to_json(const SearchConfig& c);
SearchConfig search_config_from_json(const json& j);

json to_json(const StabEstimate& s);
json to_json(const MeasureVector& m);
json to_json(const SearchResult& r);
json to_json(const CorrelationBasis& b);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string git_describe;
  std::vector<std::string> outputs;

  bool operator==(const RunManifest&) const = default;
};

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

/// Flattens leaf values into dotted-path columns and writes a header row and
/// one value row. Arrays of objects become one row each.
void write_csv(std::ostream& os, const json& j);

/// "%.17g".
std::string format_double(double v);

}  // namespace nstab
