// Copyright 2026 The mcspriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcspriv/ingest.hpp"

#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "mcspriv/trace.hpp"

namespace mcspriv {
namespace {

constexpr const char* kHeader =
    "captured_at,user_id,device_id,latitude,longitude,value,unit\n";

TEST(ParseSafecast, DropsMalformedRowsAndCounts) {
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:00Z,alice,dev1,35.1,139.1,40,cpm\n"
                        "2016-04-01T10:00:05Z,alice,dev1,35.2,139.2,41,cpm\n"
                        "not-a-time,alice,dev1,35.3,139.3,42,cpm\n"
                        "2016-04-01T10:00:10Z,alice,dev1,35.3,139.3,43,cpm\n");
  const ParseResult r = parse_safecast(in, 9.0);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].user_id, "alice");
  EXPECT_EQ(r.traces[0].size(), 3u);
  EXPECT_EQ(r.malformed_rows, 1u);
}

TEST(ParseSafecast, LatitudeOutOfBoundsIsMalformed) {
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:00Z,bob,d,91.0,139.1,40,cpm\n");
  const ParseResult r = parse_safecast(in, 0.0);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_EQ(r.malformed_rows, 1u);
}

TEST(ParseSafecast, SortsOutOfOrderRows) {
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:10Z,bob,d,35.1,139.1,40,cpm\n"
                        "2016-04-01T10:00:00Z,bob,d,35.2,139.2,41,cpm\n");
  const ParseResult r = parse_safecast(in, 0.0);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_LT(r.traces[0].measurements[0].t, r.traces[0].measurements[1].t);
  EXPECT_DOUBLE_EQ(r.traces[0].measurements[0].point.lat, 35.2);
}

TEST(ParseSafecast, EqualTimestampsKeepFileOrder) {
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:00Z,bob,d,35.1,139.1,1,cpm\n"
                        "2016-04-01T10:00:00Z,bob,d,35.2,139.2,2,cpm\n"
                        "2016-04-01T10:00:00Z,bob,d,35.3,139.3,3,cpm\n");
  const ParseResult r = parse_safecast(in, 0.0);
  ASSERT_EQ(r.traces[0].size(), 3u);
  EXPECT_DOUBLE_EQ(r.traces[0].measurements[0].value, 1);
  EXPECT_DOUBLE_EQ(r.traces[0].measurements[2].value, 3);
}

TEST(ParseSafecast, ExclusionListDropsOrganizations) {
  std::istringstream exclusion("org-fleet\n# comment\n\n");
  const std::set<std::string> excluded = parse_exclusion_list(exclusion);
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:00Z,org-fleet,d,35.1,139.1,1,cpm\n"
                        "2016-04-01T10:00:00Z,carol,d,35.2,139.2,2,cpm\n");
  const ParseResult r = parse_safecast(in, 0.0, excluded);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].user_id, "carol");
  EXPECT_EQ(r.excluded_rows, 1u);
}

TEST(ParseSafecast, UnreadableStreamIsFatal) {
  std::ifstream missing("/nonexistent/file.csv");
  EXPECT_THROW(parse_safecast(missing, 0.0), DataError);
}

TEST(ParseSafecast, SerializeParseIsFixedPoint) {
  std::istringstream in(std::string(kHeader) +
                        "2016-04-01T10:00:00Z,alice,dev1,35.123456789,139.1,40.25,cpm\n"
                        "2016-04-01T10:00:05Z,bob,dev2,-35.2,-139.2,0.125,cpm\n"
                        "1459504810,alice,dev1,35.3,139.3,43,cpm\n");
  const ParseResult first = parse_safecast(in, 0.0);

  std::ostringstream serialized;
  write_safecast(serialized, first.traces);
  std::istringstream again(serialized.str());
  const ParseResult second = parse_safecast(again, 0.0);

  std::ostringstream reserialized;
  write_safecast(reserialized, second.traces);
  EXPECT_EQ(serialized.str(), reserialized.str());
  ASSERT_EQ(second.traces.size(), 2u);
  EXPECT_EQ(second.traces[0].size(), 2u);
  EXPECT_DOUBLE_EQ(second.traces[0].measurements[0].point.lat, 35.123456789);
}

constexpr const char* kRadioHeader =
    "measured_at,latitude,longitude,signal,antenna_id,manufacturer,model,"
    "country,operator\n";

TEST(DeriveRadiocellsUsers, GroupsByQuasiId) {
  std::istringstream in(
      std::string(kRadioHeader) +
      "2015-05-01T08:00:00Z,48.1,11.5,-71,cell1,acme,m1,de,op1\n"
      "2015-05-01T08:00:10Z,48.2,11.6,-72,cell1,acme,m1,de,op1\n"
      "2015-05-01T08:00:20Z,48.3,11.7,-73,cell2,acme,m1,de,op2\n");
  const RadiocellsParseResult parsed = parse_radiocells(in);
  EXPECT_EQ(parsed.malformed_rows, 0u);
  const DeriveResult derived = derive_radiocells_users(parsed.records);
  ASSERT_EQ(derived.traces.size(), 2u);  // operator differs -> two users
  EXPECT_EQ(derived.traces[0].user_id, "acme|m1|de|op1");
  EXPECT_EQ(derived.traces[0].size(), 2u);
  EXPECT_EQ(derived.traces[1].size(), 1u);
}

TEST(DeriveRadiocellsUsers, IncompleteQuasiIdIsSkipped) {
  std::istringstream in(std::string(kRadioHeader) +
                        "2015-05-01T08:00:00Z,48.1,11.5,-71,cell1,acme,,de,op1\n");
  const RadiocellsParseResult parsed = parse_radiocells(in);
  const DeriveResult derived = derive_radiocells_users(parsed.records);
  EXPECT_TRUE(derived.traces.empty());
  EXPECT_EQ(derived.unassignable, 1u);
}

UserTrace make_trace(const std::string& user, std::size_t n, double lat0,
                     double step_deg, std::int64_t dt) {
  UserTrace t;
  t.user_id = user;
  for (std::size_t i = 0; i < n; ++i) {
    Measurement m;
    m.user_id = user;
    m.t = 1000000 + static_cast<std::int64_t>(i) * dt;
    m.point = {lat0 + step_deg * static_cast<double>(i), 139.0};
    m.value = 40;
    t.measurements.push_back(m);
  }
  return t;
}

TEST(FilterUsers, MoreThanMinPointsIsStrict) {
  std::vector<UserTrace> traces;
  traces.push_back(make_trace("exactly100", 100, 35.0, 0.0, 5));
  traces.push_back(make_trace("has101", 101, 35.0, 0.0, 5));
  const FilterResult r = filter_users(std::move(traces), 100, 200.0);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].user_id, "has101");
  EXPECT_EQ(r.dropped_too_few_points, 1u);
}

TEST(FilterUsers, SpeedViolationDropsWholeUser) {
  // 0.05 deg of latitude (~5.6 km) in 60 s is ~334 km/h.
  UserTrace fast = make_trace("fast", 101, 35.0, 0.0, 60);
  fast.measurements[50].point.lat += 0.05;
  std::vector<UserTrace> traces;
  traces.push_back(std::move(fast));
  traces.push_back(make_trace("slow", 101, 35.0, 0.0000001, 60));
  const FilterResult r = filter_users(std::move(traces), 100, 200.0);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].user_id, "slow");
  EXPECT_EQ(r.dropped_inconsistent_speed, 1u);
}

TEST(FilterUsers, ZeroTimeDeltaWithDisplacementIsInconsistent) {
  UserTrace t = make_trace("teleport", 101, 35.0, 0.0, 0);
  t.measurements[10].point.lat += 0.001;
  const FilterResult r = filter_users({t}, 100, 200.0);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_EQ(r.dropped_inconsistent_speed, 1u);
}

TEST(FilterUsers, OutputIsSubsetWithoutReordering) {
  std::vector<UserTrace> traces;
  traces.push_back(make_trace("a", 150, 35.0, 0.0, 5));
  traces.push_back(make_trace("b", 150, 36.0, 0.0, 5));
  const FilterResult r = filter_users(traces, 100, 200.0);
  ASSERT_EQ(r.traces.size(), 2u);
  for (std::size_t u = 0; u < 2; ++u) {
    EXPECT_EQ(r.traces[u].user_id, traces[u].user_id);
    for (std::size_t i = 0; i < r.traces[u].size(); ++i) {
      EXPECT_EQ(r.traces[u].measurements[i].t, traces[u].measurements[i].t);
    }
  }
}

TEST(SplitWorkHours, BoundaryRules) {
  UserTrace t;
  t.user_id = "w";
  const auto add = [&](int y, int mo, int d, int h, int mi, int s) {
    Measurement m;
    m.user_id = "w";
    m.t = utc_from_civil(y, mo, d, h, mi, s);
    m.point = {35.0, 139.0};
    t.measurements.push_back(m);
  };
  add(2017, 1, 7, 10, 0, 0);   // Saturday -> excluded
  add(2017, 1, 3, 9, 0, 0);    // Tuesday 09:00:00 -> included (closed bound)
  add(2017, 1, 3, 17, 0, 0);   // Tuesday 17:00:00 -> excluded (open bound)
  add(2017, 1, 3, 17, 0, 1);   // Tuesday 17:00:01 -> excluded
  add(2017, 1, 3, 16, 59, 59); // Tuesday 16:59:59 -> included
  t.sort_by_time();

  const UserTrace work = split_work_hours(t, 0.0);
  ASSERT_EQ(work.size(), 2u);
  EXPECT_EQ(work.measurements[0].t, utc_from_civil(2017, 1, 3, 9, 0, 0));
  EXPECT_EQ(work.measurements[1].t, utc_from_civil(2017, 1, 3, 16, 59, 59));
}

TEST(SplitWorkHours, TimezoneOffsetShiftsTheWindow) {
  UserTrace t;
  t.user_id = "tz";
  Measurement m;
  m.user_id = "tz";
  // 01:00 UTC on a Tuesday is 10:00 in UTC+9.
  m.t = utc_from_civil(2017, 1, 3, 1, 0, 0);
  m.point = {35.0, 139.0};
  t.measurements.push_back(m);
  EXPECT_EQ(split_work_hours(t, 9.0).size(), 1u);
  EXPECT_EQ(split_work_hours(t, 0.0).size(), 0u);
}

}  // namespace
}  // namespace mcspriv
