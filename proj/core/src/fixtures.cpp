#include "ehrqa/fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ehrqa/backend.hpp"
#include "ehrqa/util.hpp"

namespace ehrqa {

namespace {

std::string q(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out += "'";
  return out;
}

std::string make_time(Rng& rng, int year_lo, int year_hi) {
  char buf[64];
  int year = year_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(year_hi - year_lo + 1)));
  int month = 1 + static_cast<int>(rng.below(12));
  int day = 1 + static_cast<int>(rng.below(28));
  int hour = static_cast<int>(rng.below(24));
  int minute = static_cast<int>(rng.below(60));
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:00", year, month, day, hour, minute);
  return buf;
}

// Fixed drug -> route map so route questions have single-valued answers.
const std::vector<std::pair<std::string, std::string>> kMimicDrugs = {
    {"potassium chloride", "po"}, {"insulin", "sc"},
    {"furosemide", "iv"},         {"d5w", "iv"},
    {"ns", "iv"},                 {"aspirin", "po"},
    {"heparin", "sc"},            {"metoprolol", "po"},
    {"lidocaine 5% ointment", "tp"}, {"morphine sulfate", "iv"},
    {"acetaminophen", "po"},      {"docusate sodium", "po"},
};

const std::vector<std::pair<std::string, std::string>> kMimicDiagnoses = {
    {"9971", "surg compl-heart"},     {"4019", "hypertension nos"},
    {"25000", "diabetes uncompl"},    {"5849", "acute kidney failure"},
    {"486", "pneumonia organism nos"}, {"42731", "atrial fibrillation"},
    {"4280", "cong heart failure"},
};

const std::vector<std::pair<int, std::string>> kMimicChartItems = {
    {211, "heart rate"},
    {226707, "admit ht"},
    {226512, "admit wt"},
    {51, "arterial bp [systolic]"},
};

const std::vector<int> kMimicSubjects = {10006, 10011, 10013, 10017, 10019, 10026,
                                         10029, 10032, 10035, 10038, 10040, 10045};

}  // namespace

void build_mimic_database(const EhrDatabase& db, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("mimic");

  db.exec(
      "CREATE TABLE patients (row_id INTEGER PRIMARY KEY, subject_id INTEGER, gender TEXT, "
      "dob TEXT);"
      "CREATE TABLE admissions (row_id INTEGER PRIMARY KEY, subject_id INTEGER, hadm_id INTEGER, "
      "admittime TEXT, dischtime TEXT, admission_type TEXT);"
      "CREATE TABLE icustays (row_id INTEGER PRIMARY KEY, subject_id INTEGER, hadm_id INTEGER, "
      "icustay_id INTEGER, first_careunit TEXT, intime TEXT, outtime TEXT);"
      "CREATE TABLE d_items (row_id INTEGER PRIMARY KEY, itemid INTEGER, label TEXT, "
      "linksto TEXT);"
      "CREATE TABLE chartevents (row_id INTEGER PRIMARY KEY, subject_id INTEGER, hadm_id INTEGER, "
      "icustay_id INTEGER, itemid INTEGER, charttime TEXT, valuenum REAL);"
      "CREATE TABLE d_icd_diagnoses (row_id INTEGER PRIMARY KEY, icd9_code TEXT, "
      "short_title TEXT);"
      "CREATE TABLE diagnoses_icd (row_id INTEGER PRIMARY KEY, subject_id INTEGER, "
      "hadm_id INTEGER, icd9_code TEXT, charttime TEXT);"
      "CREATE TABLE d_icd_procedures (row_id INTEGER PRIMARY KEY, icd9_code TEXT, "
      "short_title TEXT);"
      "CREATE TABLE procedures_icd (row_id INTEGER PRIMARY KEY, subject_id INTEGER, "
      "hadm_id INTEGER, icd9_code TEXT, charttime TEXT);"
      "CREATE TABLE prescriptions (row_id INTEGER PRIMARY KEY, subject_id INTEGER, "
      "hadm_id INTEGER, startdate TEXT, drug TEXT, dose_val_rx TEXT, route TEXT);"
      "CREATE TABLE d_labitems (row_id INTEGER PRIMARY KEY, itemid INTEGER, label TEXT);"
      "CREATE TABLE labevents (row_id INTEGER PRIMARY KEY, subject_id INTEGER, hadm_id INTEGER, "
      "itemid INTEGER, charttime TEXT, valuenum REAL);");

  db.exec("BEGIN");
  int row = 0;
  for (int subject : kMimicSubjects) {
    ++row;
    std::string gender = rng.uniform() < 0.5 ? "f" : "m";
    db.exec("INSERT INTO patients VALUES (" + std::to_string(row) + ", " +
            std::to_string(subject) + ", " + q(gender) + ", " + q(make_time(rng, 2040, 2070)) +
            ")");
  }

  for (const auto& [code, title] : kMimicDiagnoses) {
    db.exec("INSERT INTO d_icd_diagnoses (icd9_code, short_title) VALUES (" + q(code) + ", " +
            q(title) + ")");
  }
  // A few procedure codes so dictionary searches have something to scan.
  db.exec(
      "INSERT INTO d_icd_procedures (icd9_code, short_title) VALUES "
      "('3961', 'extracorporeal circulat'), ('9904', 'packed cell transfusion'), "
      "('8856', 'coronary arteriograp-2'), ('9671', 'cont inv mec ven <96 hrs')");

  for (const auto& [itemid, label] : kMimicChartItems) {
    db.exec("INSERT INTO d_items (itemid, label, linksto) VALUES (" + std::to_string(itemid) +
            ", " + q(label) + ", 'chartevents')");
  }
  db.exec(
      "INSERT INTO d_labitems (itemid, label) VALUES (50912, 'creatinine'), "
      "(50971, 'potassium'), (51222, 'hemoglobin')");

  // Admissions. The first three subjects each get one dedicated admission
  // in 2103-2104 carrying the surgical-complication diagnosis; ranked
  // prescription counts for those admissions are controlled below.
  struct Adm {
    int subject;
    int hadm;
    std::string admit;
    bool is_case;
  };
  std::vector<Adm> admissions;
  int next_hadm = 120000;
  for (std::size_t i = 0; i < kMimicSubjects.size(); ++i) {
    int subject = kMimicSubjects[i];
    bool case_subject = i < 3;
    int count = 1 + static_cast<int>(rng.below(2));
    for (int a = 0; a < count; ++a) {
      Adm adm;
      adm.subject = subject;
      adm.hadm = ++next_hadm;
      adm.admit = make_time(rng, 2100, 2102);
      adm.is_case = false;
      admissions.push_back(adm);
    }
    if (case_subject) {
      Adm adm;
      adm.subject = subject;
      adm.hadm = ++next_hadm;
      adm.admit = make_time(rng, 2103, 2104);
      adm.is_case = true;
      admissions.push_back(adm);
    }
  }
  for (const auto& adm : admissions) {
    std::string disch = adm.admit.substr(0, 8) + "28 12:00:00";
    std::string type = rng.uniform() < 0.6 ? "emergency" : "elective";
    db.exec("INSERT INTO admissions (subject_id, hadm_id, admittime, dischtime, admission_type) "
            "VALUES (" +
            std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", " + q(adm.admit) +
            ", " + q(disch) + ", " + q(type) + ")");
  }

  // Diagnoses: case admissions get the surgical complication; the rest
  // draw from the remaining pool.
  for (const auto& adm : admissions) {
    if (adm.is_case) {
      db.exec("INSERT INTO diagnoses_icd (subject_id, hadm_id, icd9_code, charttime) VALUES (" +
              std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", '9971', " +
              q(adm.admit) + ")");
      continue;
    }
    int n = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) {
      const auto& diag = kMimicDiagnoses[1 + rng.below(kMimicDiagnoses.size() - 1)];
      db.exec("INSERT INTO diagnoses_icd (subject_id, hadm_id, icd9_code, charttime) VALUES (" +
              std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", " + q(diag.first) +
              ", " + q(adm.admit) + ")");
    }
  }

  // ICU stays and chart events.
  int next_icustay = 200000;
  for (const auto& adm : admissions) {
    int stays = 1 + static_cast<int>(rng.below(2));
    for (int s = 0; s < stays; ++s) {
      int icustay = ++next_icustay;
      std::string unit = rng.uniform() < 0.5 ? "micu" : "sicu";
      db.exec("INSERT INTO icustays (subject_id, hadm_id, icustay_id, first_careunit, intime, "
              "outtime) VALUES (" +
              std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", " +
              std::to_string(icustay) + ", " + q(unit) + ", " + q(adm.admit) + ", " +
              q(adm.admit.substr(0, 8) + "27 12:00:00") + ")");
      for (const auto& [itemid, label] : kMimicChartItems) {
        int n = 1 + static_cast<int>(rng.below(3));
        for (int m = 0; m < n; ++m) {
          double value;
          if (label == "heart rate") {
            value = 60 + static_cast<double>(rng.below(60));
          } else if (label == "admit ht") {
            value = 60 + static_cast<double>(rng.below(16));  // inches
          } else if (label == "admit wt") {
            value = 50 + static_cast<double>(rng.below(70));
          } else {
            value = 90 + static_cast<double>(rng.below(90));
          }
          db.exec("INSERT INTO chartevents (subject_id, hadm_id, icustay_id, itemid, charttime, "
                  "valuenum) VALUES (" +
                  std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", " +
                  std::to_string(icustay) + ", " + std::to_string(itemid) + ", " +
                  q(make_time(rng, 2100, 2105)) + ", " + format_double(value) + ")");
        }
      }
    }
  }

  // Lab events.
  for (const auto& adm : admissions) {
    int n = 2 + static_cast<int>(rng.below(4));
    for (int m = 0; m < n; ++m) {
      int itemid = std::vector<int>{50912, 50971, 51222}[rng.below(3)];
      double value = itemid == 50912 ? 0.5 + rng.below(30) * 0.1
                                     : (itemid == 50971 ? 3.0 + rng.below(25) * 0.1
                                                        : 8.0 + rng.below(80) * 0.1);
      db.exec("INSERT INTO labevents (subject_id, hadm_id, itemid, charttime, valuenum) VALUES (" +
              std::to_string(adm.subject) + ", " + std::to_string(adm.hadm) + ", " +
              std::to_string(itemid) + ", " + q(make_time(rng, 2100, 2105)) + ", " +
              format_double(value) + ")");
    }
  }

  // Prescriptions: controlled ranked counts on the case admissions (all
  // since 2103), random fill elsewhere (strictly before 2103 on case
  // subjects' other admissions does not matter; only case hadm_ids feed
  // the ranked query).
  auto insert_rx = [&](int subject, int hadm, const std::string& date, const std::string& drug,
                       const std::string& route) {
    db.exec("INSERT INTO prescriptions (subject_id, hadm_id, startdate, drug, dose_val_rx, "
            "route) VALUES (" +
            std::to_string(subject) + ", " + std::to_string(hadm) + ", " + q(date) + ", " +
            q(drug) + ", '1', " + q(route) + ")");
  };

  std::vector<const Adm*> case_adms;
  std::vector<const Adm*> other_adms;
  for (const auto& adm : admissions) {
    (adm.is_case ? case_adms : other_adms).push_back(&adm);
  }
  const std::vector<std::pair<std::string, int>> ranked = {
      {"potassium chloride", 6}, {"insulin", 5}, {"furosemide", 4}, {"d5w", 3}, {"ns", 2},
      {"aspirin", 1},            {"heparin", 1},
  };
  std::size_t spread = 0;
  for (const auto& [drug, count] : ranked) {
    std::string route;
    for (const auto& [d, r] : kMimicDrugs) {
      if (d == drug) route = r;
    }
    for (int i = 0; i < count; ++i) {
      const Adm* adm = case_adms[spread++ % case_adms.size()];
      insert_rx(adm->subject, adm->hadm, adm->admit, drug, route);
    }
  }
  // Every pool drug appears at least once outside the case admissions.
  for (const auto& [drug, route] : kMimicDrugs) {
    const Adm* adm = other_adms[rng.below(other_adms.size())];
    insert_rx(adm->subject, adm->hadm, adm->admit, drug, route);
  }
  for (int i = 0; i < 60; ++i) {
    const Adm* adm = other_adms[rng.below(other_adms.size())];
    const auto& [drug, route] = kMimicDrugs[rng.below(kMimicDrugs.size())];
    insert_rx(adm->subject, adm->hadm, adm->admit, drug, route);
  }

  db.exec("COMMIT");
}

namespace {

const std::vector<std::string> kEicuLabs = {"bedside glucose", "hct", "glucose", "hgb",
                                            "chloride", "sodium", "creatinine", "bun"};

const std::vector<std::pair<std::string, double>> kEicuTreatments = {
    {"antifungal therapy - caspofungin", 16.26},
    {"vasopressors - norepinephrine", 24.5},
    {"mechanical ventilation", 1200.0},
    {"dialysis", 850.75},
    {"antibiotics - vancomycin", 38.2},
};

const std::vector<std::string> kEicuDiagnoses = {
    "intracranial injury", "sepsis", "acute respiratory failure", "chf",
    "diabetic ketoacidosis"};

const std::vector<std::pair<std::string, std::string>> kEicuMedications = {
    {"norepinephrine", "iv"}, {"insulin", "subq"}, {"acetaminophen", "po"},
    {"furosemide", "iv"},     {"pantoprazole", "iv"},
};

}  // namespace

void build_eicu_database(const EhrDatabase& db, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("eicu");

  db.exec(
      "CREATE TABLE patient (row_id INTEGER PRIMARY KEY, patientunitstayid INTEGER, "
      "patienthealthsystemstayid INTEGER, uniquepid TEXT, gender TEXT, age TEXT, "
      "hospitaladmittime TEXT, unitadmittime TEXT, unitdischargetime TEXT);"
      "CREATE TABLE lab (row_id INTEGER PRIMARY KEY, patientunitstayid INTEGER, labname TEXT, "
      "labresult REAL, labresulttime TEXT);"
      "CREATE TABLE diagnosis (row_id INTEGER PRIMARY KEY, patientunitstayid INTEGER, "
      "diagnosisname TEXT, diagnosistime TEXT, icd9code TEXT);"
      "CREATE TABLE treatment (row_id INTEGER PRIMARY KEY, treatmentid INTEGER, "
      "patientunitstayid INTEGER, treatmentname TEXT, treatmenttime TEXT);"
      "CREATE TABLE medication (row_id INTEGER PRIMARY KEY, medicationid INTEGER, "
      "patientunitstayid INTEGER, drugname TEXT, routeadmin TEXT, drugstarttime TEXT);"
      "CREATE TABLE cost (row_id INTEGER PRIMARY KEY, uniquepid TEXT, "
      "patienthealthsystemstayid INTEGER, eventtype TEXT, eventid INTEGER, chargetime TEXT, "
      "cost REAL);");

  db.exec("BEGIN");

  struct Stay {
    std::string uniquepid;
    int health_stay;
    int unit_stay;
    std::string unit_admit;
  };
  std::vector<Stay> stays;
  int next_health = 500000;
  int next_unit = 600000;
  for (int p = 1; p <= 10; ++p) {
    char pid[16];
    std::snprintf(pid, sizeof(pid), "002-%05d", 10000 + p);
    std::string gender = rng.uniform() < 0.5 ? "female" : "male";
    std::string age = std::to_string(35 + rng.below(50));
    int health_stays = 1 + static_cast<int>(rng.below(2));
    for (int h = 0; h < health_stays; ++h) {
      int health = ++next_health;
      std::string hospital_admit = make_time(rng, 2100, 2105);
      int unit_stays = 1 + static_cast<int>(rng.below(2));
      for (int u = 0; u < unit_stays; ++u) {
        int unit = ++next_unit;
        std::string unit_admit = make_time(rng, 2100, 2105);
        db.exec("INSERT INTO patient (patientunitstayid, patienthealthsystemstayid, uniquepid, "
                "gender, age, hospitaladmittime, unitadmittime, unitdischargetime) VALUES (" +
                std::to_string(unit) + ", " + std::to_string(health) + ", " + q(pid) + ", " +
                q(gender) + ", " + q(age) + ", " + q(hospital_admit) + ", " + q(unit_admit) +
                ", " + q(unit_admit.substr(0, 8) + "27 18:00:00") + ")");
        stays.push_back({pid, health, unit, unit_admit});
      }
    }
  }

  // Labs, with injected extra rows so the overall top-4 ranking is
  // strict: bedside glucose > hct > glucose > hgb > the rest.
  for (const auto& stay : stays) {
    int n = 3 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
      const std::string& lab = kEicuLabs[rng.below(kEicuLabs.size())];
      double value = 1.0 + rng.below(1500) * 0.1;
      db.exec("INSERT INTO lab (patientunitstayid, labname, labresult, labresulttime) VALUES (" +
              std::to_string(stay.unit_stay) + ", " + q(lab) + ", " + format_double(value) + ", " +
              q(make_time(rng, 2100, 2105)) + ")");
    }
  }
  const std::vector<std::pair<std::string, int>> boost = {
      {"bedside glucose", 40}, {"hct", 32}, {"glucose", 26}, {"hgb", 20}};
  for (const auto& [lab, count] : boost) {
    for (int i = 0; i < count; ++i) {
      const Stay& stay = stays[rng.below(stays.size())];
      double value = 1.0 + rng.below(1500) * 0.1;
      db.exec("INSERT INTO lab (patientunitstayid, labname, labresult, labresulttime) VALUES (" +
              std::to_string(stay.unit_stay) + ", " + q(lab) + ", " + format_double(value) + ", " +
              q(make_time(rng, 2100, 2105)) + ")");
    }
  }
  // Value questions pin these (patient, lab) pairs; make sure rows exist.
  auto stay_of = [&](const std::string& pid) -> const Stay& {
    for (const auto& s : stays) {
      if (s.uniquepid == pid) return s;
    }
    throw std::logic_error("fixture bug: no stay for " + pid);
  };
  for (const auto& [pid, lab] : std::vector<std::pair<std::string, std::string>>{
           {"002-10002", "bedside glucose"}, {"002-10004", "hct"}, {"002-10002", "hgb"}}) {
    const Stay& stay = stay_of(pid);
    double value = 1.0 + rng.below(1500) * 0.1;
    db.exec("INSERT INTO lab (patientunitstayid, labname, labresult, labresulttime) VALUES (" +
            std::to_string(stay.unit_stay) + ", " + q(lab) + ", " + format_double(value) + ", " +
            q(make_time(rng, 2100, 2105)) + ")");
  }

  for (const auto& stay : stays) {
    int n = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) {
      const std::string& diag = kEicuDiagnoses[rng.below(kEicuDiagnoses.size())];
      db.exec("INSERT INTO diagnosis (patientunitstayid, diagnosisname, diagnosistime, icd9code) "
              "VALUES (" +
              std::to_string(stay.unit_stay) + ", " + q(diag) + ", " +
              q(make_time(rng, 2100, 2105)) + ", '')");
    }
  }

  int next_treatment = 700000;
  auto insert_treatment = [&](const Stay& stay, const std::string& name, double cost,
                              const std::string& when) {
    int tid = ++next_treatment;
    db.exec("INSERT INTO treatment (treatmentid, patientunitstayid, treatmentname, treatmenttime) "
            "VALUES (" +
            std::to_string(tid) + ", " + std::to_string(stay.unit_stay) + ", " + q(name) + ", " +
            q(when) + ")");
    db.exec("INSERT INTO cost (uniquepid, patienthealthsystemstayid, eventtype, eventid, "
            "chargetime, cost) VALUES (" +
            q(stay.uniquepid) + ", " + std::to_string(stay.health_stay) + ", 'treatment', " +
            std::to_string(tid) + ", " + q(when) + ", " + format_double(cost) + ")");
  };
  for (const auto& stay : stays) {
    int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      const auto& [name, cost] = kEicuTreatments[rng.below(kEicuTreatments.size())];
      insert_treatment(stay, name, cost, make_time(rng, 2100, 2105));
    }
  }
  // Guarantees: every treatment name exists, and the first patient has a
  // treatment after 2104 for the boolean item.
  for (const auto& [name, cost] : kEicuTreatments) {
    insert_treatment(stays[rng.below(stays.size())], name, cost, make_time(rng, 2100, 2103));
  }
  insert_treatment(stays.front(), kEicuTreatments[2].first, kEicuTreatments[2].second,
                   "2104-06-15 09:30:00");

  int next_medication = 800000;
  for (const auto& stay : stays) {
    int n = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      const auto& [drug, route] = kEicuMedications[rng.below(kEicuMedications.size())];
      db.exec("INSERT INTO medication (medicationid, patientunitstayid, drugname, routeadmin, "
              "drugstarttime) VALUES (" +
              std::to_string(++next_medication) + ", " + std::to_string(stay.unit_stay) + ", " +
              q(drug) + ", " + q(route) + ", " + q(make_time(rng, 2100, 2105)) + ")");
    }
  }
  for (const auto& [drug, route] : kEicuMedications) {
    const Stay& stay = stays[rng.below(stays.size())];
    db.exec("INSERT INTO medication (medicationid, patientunitstayid, drugname, routeadmin, "
            "drugstarttime) VALUES (" +
            std::to_string(++next_medication) + ", " + std::to_string(stay.unit_stay) + ", " +
            q(drug) + ", " + q(route) + ", " + q(make_time(rng, 2100, 2105)) + ")");
  }

  db.exec("COMMIT");
}

namespace {

struct ItemSpec {
  std::string question;
  std::string gold_query;
  std::string database_id;
};

std::vector<ItemSpec> mimic_item_specs() {
  std::vector<ItemSpec> specs;
  auto add = [&](std::string question, std::string query) {
    specs.push_back({std::move(question), std::move(query), "mimic-like"});
  };

  add("What is lidocaine 5% ointment's way of ingesting it?",
      "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
      "'lidocaine 5% ointment'");
  add("What is metoprolol's way of ingesting it?",
      "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
      "'metoprolol'");
  add("What is the route of administration of furosemide?",
      "SELECT DISTINCT prescriptions.route FROM prescriptions WHERE prescriptions.drug = "
      "'furosemide'");
  add("What are the top 5 drugs prescribed after \"surg compl-heart\" diagnosis since 2103?",
      "SELECT prescriptions.drug FROM prescriptions WHERE prescriptions.hadm_id IN (SELECT "
      "diagnoses_icd.hadm_id FROM diagnoses_icd WHERE diagnoses_icd.icd9_code IN (SELECT "
      "d_icd_diagnoses.icd9_code FROM d_icd_diagnoses WHERE d_icd_diagnoses.short_title = 'surg "
      "compl-heart')) AND prescriptions.startdate >= '2103-01-01' GROUP BY prescriptions.drug "
      "ORDER BY COUNT(*) DESC, prescriptions.drug ASC LIMIT 5");
  for (int subject : {10006, 10019, 10035}) {
    add("How many hospital admissions does patient " + std::to_string(subject) + " have?",
        "SELECT COUNT(*) FROM admissions WHERE admissions.subject_id = " +
            std::to_string(subject));
  }
  for (const char* title : {"hypertension nos", "atrial fibrillation"}) {
    add("How many patients were diagnosed with " + std::string(title) + "?",
        "SELECT COUNT(DISTINCT diagnoses_icd.subject_id) FROM diagnoses_icd WHERE "
        "diagnoses_icd.icd9_code IN (SELECT d_icd_diagnoses.icd9_code FROM d_icd_diagnoses WHERE "
        "d_icd_diagnoses.short_title = '" +
            std::string(title) + "')");
  }
  for (auto [subject, label] : std::vector<std::pair<int, const char*>>{
           {10011, "heart rate"}, {10026, "admit wt"}}) {
    add("What was the last measured " + std::string(label) + " of patient " +
            std::to_string(subject) + "?",
        "SELECT chartevents.valuenum FROM chartevents WHERE chartevents.subject_id = " +
            std::to_string(subject) +
            " AND chartevents.itemid IN (SELECT d_items.itemid FROM d_items WHERE d_items.label "
            "= '" +
            std::string(label) +
            "' AND d_items.linksto = 'chartevents') ORDER BY chartevents.charttime DESC LIMIT 1");
  }
  add("What is the maximum heart rate of patient 10013?",
      "SELECT MAX(chartevents.valuenum) FROM chartevents WHERE chartevents.subject_id = 10013 "
      "AND chartevents.itemid IN (SELECT d_items.itemid FROM d_items WHERE d_items.label = "
      "'heart rate')");
  add("Did patient 10006 receive a prescription for potassium chloride?",
      "SELECT COUNT(*) > 0 FROM prescriptions WHERE prescriptions.subject_id = 10006 AND "
      "prescriptions.drug = 'potassium chloride'");
  for (int subject : {10017, 10038}) {
    add("What is the gender of patient " + std::to_string(subject) + "?",
        "SELECT patients.gender FROM patients WHERE patients.subject_id = " +
            std::to_string(subject));
  }
  add("How many prescriptions of ns were made?",
      "SELECT COUNT(*) FROM prescriptions WHERE prescriptions.drug = 'ns'");
  add("When was patient 10029 first admitted to the hospital?",
      "SELECT MIN(admissions.admittime) FROM admissions WHERE admissions.subject_id = 10029");
  add("How many patients are recorded in the database?",
      "SELECT COUNT(DISTINCT patients.subject_id) FROM patients");
  add("What was the first measured arterial bp [systolic] of patient 10011?",
      "SELECT chartevents.valuenum FROM chartevents WHERE chartevents.subject_id = 10011 AND "
      "chartevents.itemid IN (SELECT d_items.itemid FROM d_items WHERE d_items.label = 'arterial "
      "bp [systolic]') ORDER BY chartevents.charttime ASC LIMIT 1");
  add("How many intensive care unit stays does patient 10013 have?",
      "SELECT COUNT(*) FROM icustays WHERE icustays.subject_id = 10013");
  add("How many laboratory measurements of creatinine are recorded?",
      "SELECT COUNT(*) FROM labevents WHERE labevents.itemid IN (SELECT d_labitems.itemid FROM "
      "d_labitems WHERE d_labitems.label = 'creatinine')");
  add("How many hospital admissions are recorded in total?",
      "SELECT COUNT(*) FROM admissions");
  add("What was the last measured admit ht of patient 10006?",
      "SELECT chartevents.valuenum FROM chartevents WHERE chartevents.subject_id = 10006 AND "
      "chartevents.itemid IN (SELECT d_items.itemid FROM d_items WHERE d_items.label = 'admit "
      "ht' AND d_items.linksto = 'chartevents') ORDER BY chartevents.charttime DESC LIMIT 1");
  return specs;
}

std::vector<ItemSpec> eicu_item_specs() {
  std::vector<ItemSpec> specs;
  auto add = [&](std::string question, std::string query) {
    specs.push_back({std::move(question), std::move(query), "eicu-like"});
  };

  add("What's the price for the antifungal therapy - caspofungin?",
      "SELECT DISTINCT cost.cost FROM cost WHERE cost.eventtype = 'treatment' AND cost.eventid "
      "IN (SELECT treatment.treatmentid FROM treatment WHERE treatment.treatmentname = "
      "'antifungal therapy - caspofungin')");
  add("What's the price for dialysis?",
      "SELECT DISTINCT cost.cost FROM cost WHERE cost.eventtype = 'treatment' AND cost.eventid "
      "IN (SELECT treatment.treatmentid FROM treatment WHERE treatment.treatmentname = "
      "'dialysis')");
  add("What were the top four most common laboratory tests?",
      "SELECT t.labname FROM (SELECT lab.labname AS labname, COUNT(*) AS c FROM lab GROUP BY "
      "lab.labname ORDER BY c DESC, lab.labname ASC LIMIT 4) AS t");
  for (const char* pid : {"002-10001", "002-10006"}) {
    add("How many intensive care unit stays does patient " + std::string(pid) + " have?",
        "SELECT COUNT(*) FROM patient WHERE patient.uniquepid = '" + std::string(pid) + "'");
  }
  for (auto [pid, lab] : std::vector<std::pair<const char*, const char*>>{
           {"002-10002", "bedside glucose"}, {"002-10004", "hct"}}) {
    add("What was the last value of " + std::string(lab) + " for patient " + std::string(pid) +
            "?",
        "SELECT lab.labresult FROM lab WHERE lab.patientunitstayid IN (SELECT "
        "patient.patientunitstayid FROM patient WHERE patient.uniquepid = '" +
            std::string(pid) +
            "') AND lab.labname = '" + std::string(lab) +
            "' ORDER BY lab.labresulttime DESC LIMIT 1");
  }
  add("Did patient 002-10001 receive any procedure since 2104?",
      "SELECT COUNT(*) > 0 FROM treatment WHERE treatment.patientunitstayid IN (SELECT "
      "patient.patientunitstayid FROM patient WHERE patient.uniquepid = '002-10001') AND "
      "datetime(treatment.treatmenttime) >= datetime('2104-01-01 00:00:00')");
  add("How many patients were diagnosed with sepsis?",
      "SELECT COUNT(DISTINCT patient.uniquepid) FROM diagnosis JOIN patient ON "
      "diagnosis.patientunitstayid = patient.patientunitstayid WHERE diagnosis.diagnosisname = "
      "'sepsis'");
  add("What is the route of administration of norepinephrine?",
      "SELECT DISTINCT medication.routeadmin FROM medication WHERE medication.drugname = "
      "'norepinephrine'");
  for (const char* pid : {"002-10003", "002-10008"}) {
    add("What is the gender of patient " + std::string(pid) + "?",
        "SELECT DISTINCT patient.gender FROM patient WHERE patient.uniquepid = '" +
            std::string(pid) + "'");
  }
  add("How many laboratory measurements of chloride are recorded?",
      "SELECT COUNT(*) FROM lab WHERE lab.labname = 'chloride'");
  add("How many treatments of mechanical ventilation were given?",
      "SELECT COUNT(*) FROM treatment WHERE treatment.treatmentname = 'mechanical ventilation'");
  add("When was patient 002-10005 admitted to a unit for the first time?",
      "SELECT MIN(patient.unitadmittime) FROM patient WHERE patient.uniquepid = '002-10005'");
  add("What was the highest hgb value for patient 002-10002?",
      "SELECT MAX(lab.labresult) FROM lab WHERE lab.patientunitstayid IN (SELECT "
      "patient.patientunitstayid FROM patient WHERE patient.uniquepid = '002-10002') AND "
      "lab.labname = 'hgb'");
  add("What distinct treatments did patient 002-10007 receive?",
      "SELECT DISTINCT treatment.treatmentname FROM treatment WHERE treatment.patientunitstayid "
      "IN (SELECT patient.patientunitstayid FROM patient WHERE patient.uniquepid = '002-10007') "
      "ORDER BY treatment.treatmentname ASC");
  add("How many unique patients are in the database?",
      "SELECT COUNT(DISTINCT patient.uniquepid) FROM patient");
  add("What was the first diagnosis of patient 002-10009?",
      "SELECT diagnosis.diagnosisname FROM diagnosis WHERE diagnosis.patientunitstayid IN "
      "(SELECT patient.patientunitstayid FROM patient WHERE patient.uniquepid = '002-10009') "
      "ORDER BY diagnosis.diagnosistime ASC LIMIT 1");
  add("Did patient 002-10010 have a sodium test?",
      "SELECT COUNT(*) > 0 FROM lab WHERE lab.patientunitstayid IN (SELECT "
      "patient.patientunitstayid FROM patient WHERE patient.uniquepid = '002-10010') AND "
      "lab.labname = 'sodium'");
  add("How many diagnoses of chf are recorded?",
      "SELECT COUNT(*) FROM diagnosis WHERE diagnosis.diagnosisname = 'chf'");
  return specs;
}

}  // namespace

std::vector<QaItem> build_dataset_items(const EhrDatabase& mimic, const EhrDatabase& eicu) {
  std::vector<ItemSpec> specs = mimic_item_specs();
  for (auto& s : eicu_item_specs()) specs.push_back(std::move(s));

  std::vector<QaItem> items;
  std::size_t index = 0;
  for (const auto& spec : specs) {
    const EhrDatabase& db = spec.database_id == "mimic-like" ? mimic : eicu;
    QaItem item;
    item.question = spec.question;
    item.gold_query = spec.gold_query;
    item.database_id = spec.database_id;
    item.gold_answer = gold_answer(db, spec.gold_query);
    ++index;
    char qid[32];
    std::snprintf(qid, sizeof(qid), "q%04zu", index);
    item.question_id = item.database_id + "-" + qid;
    items.push_back(std::move(item));
  }
  return items;
}

namespace {

std::string perturb_answer(const std::string& gold) {
  std::string canon = canonicalize_answer(gold);
  if (auto n = parse_plain_number(canon)) {
    std::string bumped = format_double(*n + 1.0);
    if (!grade_exact_match(std::string_view(bumped), gold)) return bumped;
  }
  auto comma = canon.rfind(", ");
  if (comma != std::string::npos) {
    std::string shorter = canon.substr(0, comma);
    if (!grade_exact_match(std::string_view(shorter), gold)) return shorter;
  }
  return "no result found";
}

struct MockProfile {
  // Cumulative outcome thresholds and confidence ranges.
  double p_correct_high, p_correct_mid, p_wrong_low;  // remainder: wrong high
  double high_lo, high_hi;
  double mid_lo, mid_hi;
  double wrong_lo, wrong_hi;
  double overconf_lo, overconf_hi;
};

nlohmann::json mock_entries_for_item(const QaItem& item, Rng rng, const MockProfile& profile) {
  nlohmann::json entries = nlohmann::json::array();

  double u = rng.uniform();
  double spread = rng.uniform();
  bool correct;
  double target;
  if (u < profile.p_correct_high) {
    correct = true;
    target = profile.high_lo + (profile.high_hi - profile.high_lo) * spread;
  } else if (u < profile.p_correct_mid) {
    correct = true;
    target = profile.mid_lo + (profile.mid_hi - profile.mid_lo) * spread;
  } else if (u < profile.p_wrong_low) {
    correct = false;
    target = profile.wrong_lo + (profile.wrong_hi - profile.wrong_lo) * spread;
  } else {
    correct = false;
    target = profile.overconf_lo + (profile.overconf_hi - profile.overconf_lo) * spread;
  }

  int marker = static_cast<int>(std::lround(target * 10.0));
  if (marker < 0) marker = 0;
  if (marker > 10) marker = 10;

  bool two_steps = rng.uniform() < 0.35;
  if (two_steps) {
    std::string table = item.database_id == "mimic-like" ? "prescriptions" : "lab";
    nlohmann::json step;
    step["question_id"] = item.question_id;
    step["response"] = "Thought: Check the table size before querying.\nProgram:\n# Confidence: " +
                       std::to_string(std::min(marker + 1, 10)) + "\nSELECT COUNT(*) FROM " +
                       table;
    entries.push_back(std::move(step));
  }
  {
    nlohmann::json step;
    step["question_id"] = item.question_id;
    step["response"] = "Thought: Run the reference query for the question.\nProgram:\n"
                       "# Confidence: " +
                       std::to_string(marker) + "\n" + item.gold_query;
    entries.push_back(std::move(step));
  }

  std::string answer = correct ? canonicalize_answer(item.gold_answer)
                               : perturb_answer(item.gold_answer);
  {
    nlohmann::json fin;
    fin["question_id"] = item.question_id;
    fin["response"] = "FINAL ANSWER: " + answer;
    entries.push_back(std::move(fin));
  }

  // Level-token distribution whose weighted sum lands on the target.
  double s = target * 4.0;
  int lo = static_cast<int>(std::floor(s));
  if (lo < 0) lo = 0;
  if (lo > 4) lo = 4;
  int hi = std::min(lo + 1, 4);
  double w = s - static_cast<double>(lo);
  nlohmann::json est;
  est["question_id"] = item.question_id;
  nlohmann::json table = nlohmann::json::object();
  if (hi == lo || w < 1e-9) {
    table[std::to_string(lo)] = 0.0;
    est["response"] = std::to_string(lo);
  } else if (w > 1.0 - 1e-9) {
    table[std::to_string(hi)] = 0.0;
    est["response"] = std::to_string(hi);
  } else {
    table[std::to_string(lo)] = std::log(1.0 - w);
    table[std::to_string(hi)] = std::log(w);
    est["response"] = std::to_string(w >= 0.5 ? hi : lo);
  }
  est["level_logprobs"] = std::move(table);
  entries.push_back(std::move(est));

  return entries;
}

void write_mock_script(const std::filesystem::path& path, const std::vector<QaItem>& items,
                       std::uint64_t seed, const std::string& label, const MockProfile& profile) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& item : items) {
    Rng rng = Rng(seed).fork(label + ":" + item.question_id);
    for (auto& e : mock_entries_for_item(item, rng, profile)) {
      entries.push_back(std::move(e));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mock script: " + path.string());
  out << entries.dump(2) << "\n";
}

void write_config(const std::filesystem::path& path, const std::string& preset,
                  const std::string& tag) {
  nlohmann::json j;
  j["agent"] = {{"preset", preset},
                {"max_steps", 10},
                {"few_shot_count", 4},
                {"temperature", 0.0},
                {"estimator_method", "weighted_sum"},
                {"stepwise_enabled", true},
                {"threshold", 0.0},
                {"model", "mock"},
                {"tag", tag}};
  j["backend"] = {{"type", "mock"}};
  j["databases"] = {{"mimic-like", "mimic.sqlite"}, {"eicu-like", "eicu.sqlite"}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

FixturePaths build_fixtures(const FixtureOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  FixturePaths paths;
  paths.mimic_db = options.out_dir / "mimic.sqlite";
  paths.eicu_db = options.out_dir / "eicu.sqlite";
  paths.dataset = options.out_dir / "dataset.jsonl";
  paths.mock_trust = options.out_dir / "mock_trust.json";
  paths.mock_baseline = options.out_dir / "mock_baseline.json";
  paths.config_trust = options.out_dir / "config_trust.json";
  paths.config_baseline = options.out_dir / "config_baseline.json";

  {
    EhrDatabase mimic = EhrDatabase::create(paths.mimic_db);
    build_mimic_database(mimic, options.seed);
    EhrDatabase eicu = EhrDatabase::create(paths.eicu_db);
    build_eicu_database(eicu, options.seed);
  }

  EhrDatabase mimic = EhrDatabase::open_readonly(paths.mimic_db);
  EhrDatabase eicu = EhrDatabase::open_readonly(paths.eicu_db);
  std::vector<QaItem> items = build_dataset_items(mimic, eicu);

  {
    std::ofstream out(paths.dataset, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + paths.dataset.string());
    for (const auto& item : items) {
      nlohmann::json j;
      j["question"] = item.question;
      j["gold_query"] = item.gold_query;
      j["gold_answer"] = item.gold_answer;
      j["database_id"] = item.database_id;
      out << j.dump() << "\n";
    }
  }

  MockProfile trust_profile;
  trust_profile.p_correct_high = 0.62;
  trust_profile.p_correct_mid = 0.74;
  trust_profile.p_wrong_low = 0.90;
  trust_profile.high_lo = 0.82;
  trust_profile.high_hi = 0.99;
  trust_profile.mid_lo = 0.45;
  trust_profile.mid_hi = 0.75;
  trust_profile.wrong_lo = 0.15;
  trust_profile.wrong_hi = 0.50;
  trust_profile.overconf_lo = 0.75;
  trust_profile.overconf_hi = 0.95;

  MockProfile baseline_profile;
  baseline_profile.p_correct_high = 0.42;
  baseline_profile.p_correct_mid = 0.55;
  baseline_profile.p_wrong_low = 0.70;
  baseline_profile.high_lo = 0.60;
  baseline_profile.high_hi = 0.95;
  baseline_profile.mid_lo = 0.30;
  baseline_profile.mid_hi = 0.60;
  baseline_profile.wrong_lo = 0.20;
  baseline_profile.wrong_hi = 0.50;
  baseline_profile.overconf_lo = 0.55;
  baseline_profile.overconf_hi = 0.90;

  write_mock_script(paths.mock_trust, items, options.seed, "mock-trust", trust_profile);
  write_mock_script(paths.mock_baseline, items, options.seed, "mock-baseline", baseline_profile);
  write_config(paths.config_trust, "trust", "trust");
  write_config(paths.config_baseline, "sql-baseline", "sql-baseline");
  return paths;
}

}  // namespace ehrqa
