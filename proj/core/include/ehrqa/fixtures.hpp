#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ehrqa/ehr.hpp"

namespace ehrqa {

// Builds the synthetic mini-EHR: two databases with MIMIC-style and
// eICU-style table shapes, a validated QA dataset over them, mock
// backend scripts for offline runs, and ready-to-use config files.
// Everything derives from the seed, so fixture text files are
// reproducible byte-for-byte.

struct FixtureOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 7;
};

struct FixturePaths {
  std::filesystem::path mimic_db;
  std::filesystem::path eicu_db;
  std::filesystem::path dataset;
  std::filesystem::path mock_trust;
  std::filesystem::path mock_baseline;
  std::filesystem::path config_trust;
  std::filesystem::path config_baseline;
};

FixturePaths build_fixtures(const FixtureOptions& options);

// Populates an open writable database with the profile's tables and
// seeded rows. Used by build_fixtures and directly by tests.
void build_mimic_database(const EhrDatabase& db, std::uint64_t seed);
void build_eicu_database(const EhrDatabase& db, std::uint64_t seed);

// The dataset items authored over the seeded databases, in file order,
// with gold answers computed by the gold oracle.
std::vector<QaItem> build_dataset_items(const EhrDatabase& mimic, const EhrDatabase& eicu);

}  // namespace ehrqa
