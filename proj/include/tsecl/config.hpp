// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_CONFIG_HPP
#define TSECL_CONFIG_HPP

#include <string>

#include "json.hpp"
#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/model.hpp"
#include "tsecl/trainer.hpp"

namespace tsecl::cli {

// Everything a run needs, resolved from one config file. The stft section is
// shared by the embedding and the model; the model's embed_dim and the
// trainer's loss/sample_rate/embedding are derived, never set directly.
struct AppConfig {
  datagen::DatasetConfig dataset;
  embedding::EmbedConfig embed;
  model::MaskNetConfig model_cfg;
  uint64_t model_seed = 7;
  trainer::TrainConfig train;

  void finalize();  // derive the coupled fields, then validate
};

AppConfig default_app_config();

// Accepts JSON ({"dataset": {...}, ...}) or TOML-style sections/key = value.
// Unknown sections or keys are configuration errors.
AppConfig load_app_config(const std::string& path);

// Section/key tree of a config file, before interpretation.
nlohmann::json parse_config_file(const std::string& path);

nlohmann::json app_config_to_json(const AppConfig& cfg);

}  // namespace tsecl::cli

#endif  // TSECL_CONFIG_HPP
