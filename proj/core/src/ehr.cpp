#include "ehrqa/ehr.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ehrqa/util.hpp"

namespace ehrqa {

namespace {

[[noreturn]] void throw_sqlite(sqlite3* db, const std::string& what) {
  throw std::runtime_error(what + ": " + (db ? sqlite3_errmsg(db) : "unknown error"));
}

}  // namespace

EhrDatabase EhrDatabase::open_readonly(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("database file not found: " + path.string());
  }
  EhrDatabase db;
  if (sqlite3_open_v2(path.c_str(), &db.db_, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    throw_sqlite(db.db_, "cannot open database " + path.string());
  }
  return db;
}

EhrDatabase EhrDatabase::open_memory() {
  EhrDatabase db;
  if (sqlite3_open_v2(":memory:", &db.db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) !=
      SQLITE_OK) {
    throw_sqlite(db.db_, "cannot open in-memory database");
  }
  return db;
}

EhrDatabase EhrDatabase::create(const std::filesystem::path& path) {
  std::filesystem::remove(path);
  EhrDatabase db;
  if (sqlite3_open_v2(path.c_str(), &db.db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE,
                      nullptr) != SQLITE_OK) {
    throw_sqlite(db.db_, "cannot create database " + path.string());
  }
  return db;
}

EhrDatabase::EhrDatabase(EhrDatabase&& other) noexcept : db_(other.db_) { other.db_ = nullptr; }

EhrDatabase& EhrDatabase::operator=(EhrDatabase&& other) noexcept {
  if (this != &other) {
    if (db_) sqlite3_close(db_);
    db_ = other.db_;
    other.db_ = nullptr;
  }
  return *this;
}

EhrDatabase::~EhrDatabase() {
  if (db_) sqlite3_close(db_);
}

void EhrDatabase::exec(const std::string& sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw std::runtime_error("sql error: " + msg);
  }
}

std::vector<std::string> EhrDatabase::table_names() const {
  std::vector<std::string> names;
  sqlite3_stmt* stmt = nullptr;
  const char* sql = "SELECT name FROM sqlite_master WHERE type='table' ORDER BY rowid";
  if (sqlite3_prepare_v2(db_, sql, -1, &stmt, nullptr) != SQLITE_OK) {
    throw_sqlite(db_, "cannot list tables");
  }
  while (sqlite3_step(stmt) == SQLITE_ROW) {
    names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0)));
  }
  sqlite3_finalize(stmt);
  return names;
}

std::string EhrDatabase::schema_text() const {
  std::string out;
  for (const auto& table : table_names()) {
    out += table;
    out += "(";
    sqlite3_stmt* stmt = nullptr;
    std::string sql = "PRAGMA table_info(" + table + ")";
    if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
      throw_sqlite(db_, "cannot read schema of " + table);
    }
    bool first = true;
    while (sqlite3_step(stmt) == SQLITE_ROW) {
      if (!first) out += ", ";
      first = false;
      out += reinterpret_cast<const char*>(sqlite3_column_text(stmt, 1));
    }
    sqlite3_finalize(stmt);
    out += ")\n";
  }
  return out;
}

namespace {

struct ProgressDeadline {
  std::chrono::steady_clock::time_point deadline;
};

int progress_callback(void* ctx) {
  auto* d = static_cast<ProgressDeadline*>(ctx);
  return std::chrono::steady_clock::now() > d->deadline ? 1 : 0;
}

std::string render_cell(sqlite3_stmt* stmt, int col) {
  if (sqlite3_column_type(stmt, col) == SQLITE_NULL) return "null";
  const unsigned char* text = sqlite3_column_text(stmt, col);
  return text ? reinterpret_cast<const char*>(text) : "";
}

}  // namespace

QueryResult execute_query(const EhrDatabase& db, std::string_view program,
                          const QueryLimits& limits) {
  sqlite3* handle = db.handle();
  std::string sql(trim(program));
  if (sql.empty()) return {false, "error: empty program"};

  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(handle, sql.c_str(), -1, &stmt, &tail) != SQLITE_OK) {
    std::string msg = std::string("error: ") + sqlite3_errmsg(handle);
    sqlite3_finalize(stmt);
    return {false, msg};
  }
  if (stmt == nullptr) return {false, "error: no SQL statement found"};
  if (tail && !trim(tail).empty()) {
    sqlite3_finalize(stmt);
    return {false, "error: only a single SQL statement is allowed"};
  }
  if (sqlite3_stmt_readonly(stmt) == 0) {
    sqlite3_finalize(stmt);
    return {false, "error: mutation rejected (store is read-only)"};
  }

  ProgressDeadline deadline{std::chrono::steady_clock::now() + limits.max_time};
  sqlite3_progress_handler(handle, 1000, progress_callback, &deadline);

  std::string out;
  std::size_t cells = 0;
  std::size_t rows = 0;
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    if (++rows > limits.max_rows) {
      sqlite3_progress_handler(handle, 0, nullptr, nullptr);
      sqlite3_finalize(stmt);
      return {false, "error: row limit exceeded (" + std::to_string(limits.max_rows) + ")"};
    }
    int ncols = sqlite3_column_count(stmt);
    for (int c = 0; c < ncols; ++c) {
      if (cells > 0) out += ", ";
      out += render_cell(stmt, c);
      ++cells;
    }
  }
  sqlite3_progress_handler(handle, 0, nullptr, nullptr);
  if (rc != SQLITE_DONE) {
    std::string msg = rc == SQLITE_INTERRUPT
                          ? "error: time limit exceeded"
                          : std::string("error: ") + sqlite3_errmsg(handle);
    sqlite3_finalize(stmt);
    return {false, msg};
  }
  sqlite3_finalize(stmt);
  if (cells == 0) return {true, "(no results)"};
  return {true, out};
}

std::string gold_answer(const EhrDatabase& db, std::string_view gold_query) {
  QueryResult res = execute_query(db, gold_query);
  if (!res.ok) {
    throw std::runtime_error("gold query failed: " + res.text);
  }
  if (res.text == "(no results)") {
    throw std::runtime_error("gold query returned no rows");
  }
  return canonicalize_answer(res.text);
}

namespace {

// "66.0" -> "66"; leaves "16.26" and non-numerics alone.
std::string strip_numeric_zero(std::string element) {
  auto dot = element.find('.');
  if (dot == std::string::npos || dot == 0) return element;
  bool numeric = true;
  std::size_t start = element[0] == '-' ? 1 : 0;
  if (start == dot) return element;
  for (std::size_t i = start; i < element.size(); ++i) {
    if (i == dot) continue;
    if (!std::isdigit(static_cast<unsigned char>(element[i]))) {
      numeric = false;
      break;
    }
  }
  if (!numeric) return element;
  std::size_t i = element.size();
  while (i > dot + 1 && element[i - 1] == '0') --i;
  if (i == dot + 1) i = dot;  // all-zero fraction: drop the point too
  return element.substr(0, i);
}

}  // namespace

std::string canonicalize_answer(std::string_view answer) {
  std::string lowered = to_lower(answer);
  // Split on list separators, canonicalize each element, preserve order.
  std::vector<std::string> elements;
  std::string cur;
  for (char c : lowered) {
    if (c == ',') {
      elements.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  elements.push_back(cur);

  std::string out;
  bool first = true;
  for (auto& e : elements) {
    std::string norm = collapse_whitespace(e);
    if (norm.empty() && elements.size() > 1) continue;
    norm = strip_numeric_zero(std::move(norm));
    if (!first) out += ", ";
    first = false;
    out += norm;
  }
  return out;
}

bool grade_exact_match(std::string_view predicted, std::string_view gold) {
  return canonicalize_answer(predicted) == canonicalize_answer(gold);
}

bool grade_exact_match(const std::optional<std::string>& predicted, std::string_view gold) {
  return predicted.has_value() && grade_exact_match(std::string_view(*predicted), gold);
}

DatasetLoadResult load_dataset(const std::filesystem::path& path, const DatabaseMap& databases) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());

  DatasetLoadResult result;
  std::string line;
  std::size_t lineno = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": malformed dataset line");
    }
    QaItem item;
    try {
      item.question = j.at("question").get<std::string>();
      item.gold_query = j.at("gold_query").get<std::string>();
      item.gold_answer = j.at("gold_answer").get<std::string>();
      item.database_id = j.at("database_id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ++index;
    char qid[32];
    std::snprintf(qid, sizeof(qid), "q%04zu", index);
    item.question_id = item.database_id + "-" + qid;

    auto dbit = databases.find(item.database_id);
    if (dbit == databases.end() || dbit->second == nullptr) {
      result.diagnostics.push_back(item.question_id + ": unknown database_id '" +
                                   item.database_id + "'");
      continue;
    }
    try {
      std::string computed = gold_answer(*dbit->second, item.gold_query);
      if (!grade_exact_match(std::string_view(computed), item.gold_answer)) {
        result.diagnostics.push_back(item.question_id + ": gold query result '" + computed +
                                     "' does not match gold answer '" + item.gold_answer + "'");
        continue;
      }
    } catch (const std::exception& e) {
      result.diagnostics.push_back(item.question_id + ": " + e.what());
      continue;
    }
    result.items.push_back(std::move(item));
  }
  if (result.items.empty()) {
    throw std::runtime_error("no valid items in dataset: " + path.string());
  }
  return result;
}

}  // namespace ehrqa
