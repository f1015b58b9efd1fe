#pragma once

#include <filesystem>
#include <string>

#include "pae/task.hpp"
#include "pae/webworld.hpp"

namespace pae::testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(PAE_SOURCE_DIR) / rel;
}

inline const web::World& fixture_world() {
  static const web::World world = web::load_world_or_throw(source_path("data/worlds/threeshop.json"));
  return world;
}

inline Task make_task(const std::string& id, const std::string& site, const std::string& instruction,
                      const std::string& verifier) {
  Task t;
  t.task_id = id;
  t.site_id = site;
  t.instruction = instruction;
  t.verifier_ref = verifier;
  return t;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pae_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pae::testing
