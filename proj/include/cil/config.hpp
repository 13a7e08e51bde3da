#pragma once

#include <cstdint>
#include <string>

#include "cil/losses.hpp"
#include "cil/network.hpp"
#include "cil/protocol.hpp"

namespace cil {

// One run, fully described. Parsed from a plain-text `key = value` file;
// unknown keys and malformed values are ConfigErrors naming the key.
struct RunConfig {
  std::string dataset = "blobs";  // blobs | delimited
  // blobs.*
  std::size_t blobs_classes = 8;
  std::size_t blobs_per_class = 100;
  std::size_t blobs_dim = 16;
  double blobs_separation = 2.0;
  double blobs_noise = 0.2;
  // delimited
  std::string data_path;
  // split.*
  std::size_t split_base = 4;
  std::size_t split_inc = 2;
  // schedule.*
  TrainSchedule schedule;
  // loss.*
  LossConfig loss;
  double E_W = 1.0;
  // network
  std::string wiring = "parallel";
  std::string head = "etf";
  bool adapt = true;
  std::size_t width = 0;    // 0: data dimension
  std::size_t etf_dim = 0;  // 0: max(width, total classes)
  std::uint64_t seed = 1;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);
// Canonical text form; equal configs normalize to identical strings.
std::string normalize_config(const RunConfig& cfg);

// Builds dataset, stream, model and classifier from the config and runs the
// incremental protocol.
RunReport run_config(const RunConfig& cfg, const RunHooks& hooks = {});

}  // namespace cil
