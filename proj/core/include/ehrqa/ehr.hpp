#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;

namespace ehrqa {

// A relational EHR snapshot. Databases opened from disk are read-only;
// in-memory databases are writable (fixture building and tests).
class EhrDatabase {
 public:
  static EhrDatabase open_readonly(const std::filesystem::path& path);
  static EhrDatabase open_memory();
  static EhrDatabase create(const std::filesystem::path& path);  // writable, for fixture build

  EhrDatabase(EhrDatabase&& other) noexcept;
  EhrDatabase& operator=(EhrDatabase&& other) noexcept;
  EhrDatabase(const EhrDatabase&) = delete;
  EhrDatabase& operator=(const EhrDatabase&) = delete;
  ~EhrDatabase();

  sqlite3* handle() const { return db_; }

  // Executes DDL/DML during fixture construction. Throws on error.
  void exec(const std::string& sql) const;

  std::vector<std::string> table_names() const;

  // "table(col1, col2, ...)" lines in creation order; the schema text
  // handed to agents as EHR metadata.
  std::string schema_text() const;

 private:
  EhrDatabase() = default;
  sqlite3* db_ = nullptr;
};

struct QueryLimits {
  std::size_t max_rows = 10000;
  std::chrono::milliseconds max_time{5000};
};

struct QueryResult {
  bool ok = false;
  std::string text;  // rendered table, or an error description
};

// Runs one read-only SQL statement under the limits. Errors (syntax,
// mutation attempts, multiple statements, limit overruns) come back as
// text in the result, never as exceptions: the caller records them as
// the step observation. Single-cell results render bare; multi-cell
// results render comma-joined in row-major order.
QueryResult execute_query(const EhrDatabase& db, std::string_view program,
                          const QueryLimits& limits = {});

// Executes a gold reference query and canonicalizes its rendering; the
// ground-truth oracle for grading. Throws on any failure, since a
// failing gold query means the dataset item is invalid.
std::string gold_answer(const EhrDatabase& db, std::string_view gold_query);

// Grading normalization: trim, collapse internal whitespace, lowercase,
// strip trailing ".0" from pure numerics, normalize list separators to
// ", " keeping order.
std::string canonicalize_answer(std::string_view answer);

bool grade_exact_match(std::string_view predicted, std::string_view gold);
// An absent prediction never matches.
bool grade_exact_match(const std::optional<std::string>& predicted, std::string_view gold);
// Exact-type overloads so string literals and std::string do not fall
// into the optional's converting constructor.
inline bool grade_exact_match(const char* predicted, std::string_view gold) {
  return grade_exact_match(std::string_view(predicted), gold);
}
inline bool grade_exact_match(const std::string& predicted, std::string_view gold) {
  return grade_exact_match(std::string_view(predicted), gold);
}

struct QaItem {
  std::string question_id;
  std::string question;
  std::string gold_query;
  std::string gold_answer;
  std::string database_id;
};

using DatabaseMap = std::map<std::string, const EhrDatabase*>;

struct DatasetLoadResult {
  std::vector<QaItem> items;
  std::vector<std::string> diagnostics;  // one line per excluded item
};

// Loads a newline-delimited dataset of {question, gold_query,
// gold_answer, database_id} objects and validates every item against its
// database: the gold query must execute and its canonicalized result
// must match the stored gold answer. Invalid items are excluded with a
// diagnostic. Throws when the file is unreadable or no item survives.
DatasetLoadResult load_dataset(const std::filesystem::path& path, const DatabaseMap& databases);

}  // namespace ehrqa
