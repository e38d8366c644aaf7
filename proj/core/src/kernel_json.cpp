#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sphconv/error.hpp"
#include "sphconv/lsc.hpp"

namespace sphconv {

using nlohmann::json;

std::string kernel_to_json(const KernelDocument& doc) {
  const LscKernel& k = doc.kernel;
  json weights = json::array();
  for (std::size_t so = 0; so < k.shells_out(); ++so) {
    json per_out = json::array();
    for (std::size_t si = 0; si < k.shells_in(); ++si) {
      json row = json::array();
      for (std::size_t j = 0; j < k.length(); ++j) row.push_back(k.weight(so, si, j));
      per_out.push_back(std::move(row));
    }
    weights.push_back(std::move(per_out));
  }
  json out = {
      {"shells_in", k.shells_in()},
      {"shells_out", k.shells_out()},
      {"kernel_sizes", doc.kernel_sizes},
      {"angular_distance", doc.angular_distance},
      {"weights", std::move(weights)},
      {"bias", std::vector<double>(k.biases().begin(), k.biases().end())},
  };
  return out.dump(2) + "\n";
}

namespace {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("kernel JSON is missing \"") + name + "\"");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("kernel JSON field \"") + name + "\": " + e.what());
  }
}

}  // namespace

KernelDocument kernel_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("kernel JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("kernel JSON must be an object");

  const auto shells_in = field<std::size_t>(j, "shells_in");
  const auto shells_out = field<std::size_t>(j, "shells_out");
  auto sizes = field<std::vector<int>>(j, "kernel_sizes");
  const auto alpha = field<double>(j, "angular_distance");
  const auto nested = field<std::vector<std::vector<std::vector<double>>>>(j, "weights");
  auto bias = field<std::vector<double>>(j, "bias");

  std::size_t k = 0;
  try {
    k = kernel_length(sizes);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("kernel JSON: ") + e.what());
  }

  if (nested.size() != shells_out)
    throw ParseError("kernel JSON weights have " + std::to_string(nested.size()) +
                     " output blocks, shells_out is " + std::to_string(shells_out));
  std::vector<double> flat;
  flat.reserve(shells_out * shells_in * k);
  for (const auto& per_out : nested) {
    if (per_out.size() != shells_in)
      throw ParseError("kernel JSON weights have " + std::to_string(per_out.size()) +
                       " input blocks, shells_in is " + std::to_string(shells_in));
    for (const auto& row : per_out) {
      if (row.size() != k)
        throw ParseError("kernel JSON weight vector has length " + std::to_string(row.size()) +
                         ", kernel_sizes imply K = " + std::to_string(k));
      flat.insert(flat.end(), row.begin(), row.end());
    }
  }

  try {
    return KernelDocument{LscKernel(shells_in, shells_out, k, std::move(flat), std::move(bias)),
                          std::move(sizes), alpha};
  } catch (const Error& e) {
    throw ParseError(std::string("kernel JSON: ") + e.what());
  }
}

KernelDocument read_kernel_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return kernel_from_json(buf.str());
}

void write_kernel_json(const std::filesystem::path& path, const KernelDocument& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write kernel file " + path.string());
  out << kernel_to_json(doc);
}

}  // namespace sphconv
