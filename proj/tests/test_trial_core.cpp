#include <doctest.h>

#include <sstream>

#include "dosefind/trial_core.hpp"

using namespace dosefind;

TEST_CASE("snapshot at day 22 of a three-patient cohort") {
  // Enrolled on days 0, 5 and 12; the first has a DLT on day 9.
  std::vector<PatientRecord> recs = {{1, 1, 0.0, 9.0}, {2, 1, 5.0, std::nullopt}, {3, 1, 12.0, 40.0}};
  Snapshot s = snapshot(recs, 22.0, 28.0);
  DoseTally t = tally(s, 3);
  CHECK(t[0].n == 1);
  CHECK(t[0].m == 0);
  CHECK(t[0].r == 2);
  CHECK(t[0].N == 3);
  CHECK(s.patients[1].followup == doctest::Approx(17.0));
  CHECK(s.pending_count() == 2);
}

TEST_CASE("follow-up is capped at the window and completes the assessment") {
  std::vector<PatientRecord> recs = {{1, 2, 0.0, std::nullopt}, {2, 2, 0.0, 30.0}};
  Snapshot s = snapshot(recs, 50.0, 28.0);
  CHECK(s.patients[0].assessed);
  CHECK_FALSE(s.patients[0].dlt);
  CHECK(s.patients[0].followup == doctest::Approx(28.0));
  // DLT after the window is not a DLT.
  CHECK(s.patients[1].assessed);
  CHECK_FALSE(s.patients[1].dlt);
  auto full = complete_tally(recs, 2, 28.0);
  CHECK(full[1].m == 2);
}

TEST_CASE("snapshot rejects enrollment after the snapshot time") {
  std::vector<PatientRecord> recs = {{1, 1, 10.0, std::nullopt}};
  CHECK_THROWS_AS(snapshot(recs, 5.0, 28.0), InputError);
  CHECK_THROWS_AS(snapshot(recs, -1.0, 28.0), InputError);
}

TEST_CASE("tally rejects dose out of range") {
  std::vector<PatientRecord> recs = {{1, 4, 0.0, std::nullopt}};
  CHECK_THROWS_AS(tally(snapshot(recs, 1.0, 28.0), 3), InputError);
}

TEST_CASE("tied enrollment times keep enrollment order") {
  std::vector<PatientRecord> recs = {{1, 1, 3.0, std::nullopt}, {2, 1, 3.0, 1.0}};
  Snapshot s = snapshot(recs, 5.0, 28.0);
  CHECK(s.patients[0].id == 1);
  CHECK(s.patients[1].dlt);
}

TEST_CASE("decision helpers") {
  CHECK(Decision::escalate(3, 5).level == 4);
  CHECK(Decision::escalate(5, 5).level == 5);
  CHECK(Decision::deescalate(1).level == 1);
  CHECK(Decision::deescalate(3).level == 2);
  CHECK_FALSE(Decision::suspend(2).enrolls());
  CHECK_FALSE(Decision::terminate().enrolls());
  CHECK(Decision::assign(1).enrolls());
  CHECK(direction(3, 2) == 1);
  CHECK(direction(2, 2) == 0);
  CHECK(direction(1, 2) == -1);
}

TEST_CASE("records and snapshots round-trip through JSON lines") {
  std::vector<PatientRecord> recs = {{1, 1, 0.0, 9.5}, {2, 2, 4.0, std::nullopt}};
  std::stringstream ss;
  write_records(ss, recs);
  auto back = read_records(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].dlt_time.value() == doctest::Approx(9.5));
  CHECK_FALSE(back[1].dlt_time.has_value());

  Snapshot s = snapshot(recs, 20.0, 28.0);
  std::stringstream ss2;
  write_snapshot(ss2, s);
  Snapshot t = read_snapshot(ss2);
  REQUIRE(t.patients.size() == 2);
  CHECK(t.clock == doctest::Approx(20.0));
  CHECK(t.patients[1].followup == doctest::Approx(16.0));
  CHECK(t.patients[0].dlt);
}

TEST_CASE("grid validation") {
  DoseGrid g;
  CHECK_NOTHROW(g.validate());
  g.target = 1.2;
  CHECK_THROWS_AS(g.validate(), InputError);
  g = DoseGrid{};
  g.J = 0;
  CHECK_THROWS_AS(g.validate(), InputError);
}
