#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "support.hpp"

using namespace pvnowcast;
using namespace testing_support;

namespace {

const char* kHeader = "day_id,t,temperature_c,irradiance_wm2,h3_amp_a,power_kw\n";

std::string expect_data_error(const std::string& csv) {
  const auto dir = scratch_dir("measurement_err");
  write_file(dir / "pool.csv", csv);
  try {
    load_pool((dir / "pool.csv").string());
  } catch (const DataError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected DataError";
  return {};
}

/// Bell-shaped reference over [t0, t0 + n).
IrradianceProfile bell(int t0, int n) {
  IrradianceProfile p{t0, {}};
  for (int i = 0; i < n; ++i) p.values.push_back(900.0 * std::sin(std::numbers::pi * (i + 0.5) / n));
  return p;
}

DaySeries day_from(const IrradianceProfile& ref, const std::string& id, double factor) {
  DaySeries d{id, {}, DayLabel::sunny};
  for (std::size_t i = 0; i < ref.values.size(); ++i)
    d.samples.push_back({ref.t0 + static_cast<int>(i), 20.0, factor * ref.values[i], 0.1, 1.0});
  return d;
}

MeasurementPool labelled_pool(const std::vector<DayLabel>& labels) {
  MeasurementPool p;
  for (std::size_t i = 0; i < labels.size(); ++i)
    p.days.push_back({"d" + std::to_string(i), {{100, 20.0, 500.0, 0.5, 5.0}}, labels[i]});
  return p;
}

}  // namespace

TEST(LoadPool, SingleRowBindsFieldsByHeader) {
  const auto dir = scratch_dir("measurement_one");
  write_file(dir / "pool.csv", std::string(kHeader) + "d1,43200,25.0,800.0,1.2,10.5\n");
  const auto pool = load_pool((dir / "pool.csv").string());
  ASSERT_EQ(pool.num_meas(), 1u);
  ASSERT_EQ(pool.days[0].size(), 1u);
  const Sample& s = pool.days[0].samples[0];
  EXPECT_EQ(pool.days[0].day_id, "d1");
  EXPECT_EQ(s.t, 43200);
  EXPECT_EQ(s.temperature, 25.0);
  EXPECT_EQ(s.irradiance, 800.0);
  EXPECT_EQ(s.h3_amp, 1.2);
  EXPECT_EQ(s.power, 10.5);
}

TEST(LoadPool, ColumnOrderFollowsHeader) {
  const auto dir = scratch_dir("measurement_order");
  write_file(dir / "pool.csv", "power_kw,h3_amp_a,t,day_id,irradiance_wm2,temperature_c\n10.5,1.2,43200,d1,800,25\n");
  const auto pool = load_pool((dir / "pool.csv").string());
  const Sample& s = pool.days[0].samples[0];
  EXPECT_EQ(s.power, 10.5);
  EXPECT_EQ(s.h3_amp, 1.2);
  EXPECT_EQ(s.irradiance, 800.0);
  EXPECT_EQ(s.temperature, 25.0);
}

TEST(LoadPool, CustomSchemaNames) {
  const auto dir = scratch_dir("measurement_schema");
  write_file(dir / "pool.csv", "day,sec,T,G,H3,P\nx,10,1,600,3,4\nx,11,1,600,3,4\n");
  PoolSchema schema{"day", "sec", "T", "G", "H3", "P"};
  const auto pool = load_pool((dir / "pool.csv").string(), schema);
  EXPECT_EQ(pool.days[0].size(), 2u);
}

TEST(LoadPool, RowsGroupedByDayInFirstAppearanceOrder) {
  const auto dir = scratch_dir("measurement_group");
  write_file(dir / "pool.csv", std::string(kHeader) +
                                   "b,5,1,600,3,4\na,7,1,600,3,4\nb,6,1,600,3,4\na,8,1,600,3,4\n");
  const auto pool = load_pool((dir / "pool.csv").string());
  ASSERT_EQ(pool.num_meas(), 2u);
  EXPECT_EQ(pool.days[0].day_id, "b");
  EXPECT_EQ(pool.days[1].day_id, "a");
  EXPECT_EQ(pool.days[0].start_t(), 5);
  EXPECT_EQ(pool.days[1].end_t(), 9);
}

TEST(LoadPool, DuplicatedTimestampNamesDayAndTime) {
  const auto msg = expect_data_error(std::string(kHeader) + "d7,100,1,2,3,4\nd7,100,1,2,3,4\n");
  EXPECT_NE(msg.find("d7"), std::string::npos) << msg;
  EXPECT_NE(msg.find("100"), std::string::npos) << msg;
  EXPECT_NE(msg.find("duplicated"), std::string::npos) << msg;
}

TEST(LoadPool, NonMonotoneTimestampRejected) {
  const auto msg = expect_data_error(std::string(kHeader) + "d1,101,1,2,3,4\nd1,100,1,2,3,4\n");
  EXPECT_NE(msg.find("non-monotone"), std::string::npos) << msg;
}

TEST(LoadPool, GapIsHardError) {
  const auto msg = expect_data_error(std::string(kHeader) + "d1,100,1,2,3,4\nd1,102,1,2,3,4\n");
  EXPECT_NE(msg.find("missing samples"), std::string::npos) << msg;
}

TEST(LoadPool, MalformedRowReportsLineNumber) {
  const auto msg = expect_data_error(std::string(kHeader) + "d1,100,1,2,3,4\nd1,101,1,oops,3,4\n");
  EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("irradiance_wm2"), std::string::npos) << msg;
}

TEST(LoadPool, WrongFieldCountReportsLineNumber) {
  const auto msg = expect_data_error(std::string(kHeader) + "d1,100,1,2,3\n");
  EXPECT_NE(msg.find("2"), std::string::npos) << msg;
}

TEST(LoadPool, MissingColumnNamed) {
  const auto msg = expect_data_error("day_id,t,temperature_c,irradiance_wm2,power_kw\nd1,1,1,1,1\n");
  EXPECT_NE(msg.find("h3_amp_a"), std::string::npos) << msg;
}

TEST(LoadPool, NegativePowerRejected) {
  const auto msg = expect_data_error(std::string(kHeader) + "d1,100,1,2,3,-4\n");
  EXPECT_NE(msg.find("non-negative"), std::string::npos) << msg;
}

TEST(LoadPool, TimestampOutsideDayRejected) {
  expect_data_error(std::string(kHeader) + "d1,86400,1,2,3,4\n");
}

TEST(LoadPool, MissingFileThrows) {
  EXPECT_THROW(load_pool("/nonexistent/pool.csv"), DataError);
}

TEST(LoadPool, FourteenDaysAtOneSecond) {
  const auto pool = simulate_pool(windowed_site(43000, 43300), PvsSpec{}, 14, WeatherMix{}, 3);
  const auto dir = scratch_dir("measurement_14");
  save_pool(pool, (dir / "pool.csv").string());
  const auto loaded = load_pool((dir / "pool.csv").string());
  EXPECT_EQ(loaded.num_meas(), 14u);
  for (const auto& d : loaded.days) EXPECT_EQ(d.size(), 300u);
}

TEST(LoadPool, SaveLoadSaveIsByteIdentical) {
  const auto dir = scratch_dir("measurement_roundtrip");
  save_pool(small_pool(), (dir / "a.csv").string());
  save_pool(load_pool((dir / "a.csv").string()), (dir / "b.csv").string());
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
}

TEST(LoadPool, CrlfAndBomTolerated) {
  const auto dir = scratch_dir("measurement_crlf");
  write_file(dir / "pool.csv", "\xEF\xBB\xBF" "day_id,t,temperature_c,irradiance_wm2,h3_amp_a,power_kw\r\nd1,1,1,600,3,4\r\n");
  EXPECT_EQ(load_pool((dir / "pool.csv").string()).num_samples(), 1u);
}

TEST(ValidatePool, DuplicateDayIdRejected) {
  MeasurementPool p = labelled_pool({DayLabel::sunny, DayLabel::rainy});
  p.days[1].day_id = p.days[0].day_id;
  EXPECT_THROW(validate_pool(p), DataError);
}

TEST(ClassifyDay, ClearSkyCopyIsSunny) {
  const auto ref = bell(36000, 7200);
  EXPECT_EQ(classify_day(day_from(ref, "c", 1.0), ref), DayLabel::sunny);
}

TEST(ClassifyDay, TenPercentOfClearSkyIsRainy) {
  const auto ref = bell(36000, 7200);
  EXPECT_EQ(classify_day(day_from(ref, "r", 0.1), ref), DayLabel::rainy);
}

TEST(ClassifyDay, HalfClearSkyIsCloudy) {
  const auto ref = bell(36000, 7200);
  EXPECT_EQ(classify_day(day_from(ref, "h", 0.5), ref), DayLabel::cloudy);
}

TEST(ClassifyDay, TwentyShortEventsMakePartlyCloudy) {
  const auto ref = bell(30000, 36000);
  DaySeries d = day_from(ref, "p", 1.0);
  // Events of 120 s at 50% attenuation every 1500 s, away from the dim edges.
  int hand_count = 0;
  for (int e = 0; e < 20; ++e) {
    const int begin = 3000 + 1500 * e;
    for (int k = 0; k < 120; ++k) d.samples[static_cast<std::size_t>(begin + k)].irradiance *= 0.5;
    ++hand_count;
  }
  const auto stats = clear_sky_index_stats(d, ref);
  EXPECT_EQ(stats.drop_events, hand_count);
  EXPECT_GE(stats.mean_index, 0.9);
  EXPECT_EQ(classify_day(d, ref), DayLabel::partly_cloudy);
}

TEST(ClassifyDay, TwoEventsStaySunny) {
  const auto ref = bell(30000, 7200);
  DaySeries d = day_from(ref, "s", 1.0);
  for (int k = 0; k < 100; ++k) d.samples[static_cast<std::size_t>(2000 + k)].irradiance *= 0.5;
  for (int k = 0; k < 100; ++k) d.samples[static_cast<std::size_t>(4000 + k)].irradiance *= 0.5;
  EXPECT_EQ(clear_sky_index_stats(d, ref).drop_events, 2);
  EXPECT_EQ(classify_day(d, ref), DayLabel::sunny);
}

TEST(ClassifyDay, ThresholdsAreConfigurable) {
  const auto ref = bell(36000, 3600);
  ClassifierThresholds th;
  th.rainy_index = 0.6;
  EXPECT_EQ(classify_day(day_from(ref, "x", 0.5), ref, th), DayLabel::rainy);
}

TEST(ClassifyDay, NoOverlapThrows) {
  const auto ref = bell(36000, 100);
  const auto other = bell(50000, 100);
  EXPECT_THROW(classify_day(day_from(other, "x", 1.0), ref), DomainError);
}

TEST(ClassifyDay, PureFunctionOfInputs) {
  const auto& pool = small_pool();
  const auto ref = clear_sky_envelope(pool);
  for (const auto& d : pool.days) EXPECT_EQ(classify_day(d, ref), classify_day(d, ref));
}

TEST(SelectSunnyDay, SingleSunnyDayAlwaysChosen) {
  const auto pool = labelled_pool({DayLabel::rainy, DayLabel::sunny, DayLabel::cloudy});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = make_rng(seed, {});
    EXPECT_EQ(select_sunny_day(pool, rng).day_id, "d1");
  }
}

TEST(SelectSunnyDay, UniformOverThreeSunnyDays) {
  const auto pool = labelled_pool({DayLabel::sunny, DayLabel::cloudy, DayLabel::sunny, DayLabel::sunny});
  Rng rng = make_rng(5, {});
  std::map<std::size_t, int> counts;
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) ++counts[select_sunny_index(pool, rng)];
  EXPECT_EQ(counts.count(1), 0u);
  double chi2 = 0.0;
  for (std::size_t i : {0u, 2u, 3u}) {
    const double f = counts[i] / static_cast<double>(kDraws);
    EXPECT_NEAR(f, 1.0 / 3.0, 0.02);
    const double expected = kDraws / 3.0;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  EXPECT_LT(chi2, 13.8);  // 99.9% quantile, 2 degrees of freedom
}

TEST(SelectSunnyDay, UniformAcrossSeeds) {
  const auto pool = labelled_pool({DayLabel::sunny, DayLabel::sunny, DayLabel::rainy, DayLabel::sunny});
  std::map<std::size_t, int> counts;
  constexpr int kSeeds = 10000;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng = make_rng(static_cast<std::uint64_t>(s), {42});
    ++counts[select_sunny_index(pool, rng)];
  }
  const double p = 1.0 / 3.0, sigma = std::sqrt(kSeeds * p * (1.0 - p));
  for (std::size_t i : {0u, 1u, 3u}) EXPECT_NEAR(counts[i], kSeeds * p, 3.0 * sigma);
}

TEST(SelectSunnyDay, DeterministicForSeed) {
  const auto pool = labelled_pool({DayLabel::sunny, DayLabel::sunny, DayLabel::sunny});
  Rng a = make_rng(99, {1}), b = make_rng(99, {1});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_sunny_index(pool, a), select_sunny_index(pool, b));
}

TEST(SelectSunnyDay, NoSunnyDayThrows) {
  const auto pool = labelled_pool({DayLabel::rainy, DayLabel::cloudy});
  Rng rng = make_rng(1, {});
  EXPECT_THROW(select_sunny_day(pool, rng), DomainError);
}

TEST(ClearSkyEnvelope, IsPerSecondMaximum) {
  MeasurementPool p;
  p.days.push_back({"a", {{10, 0, 5, 0, 0}, {11, 0, 1, 0, 0}}, DayLabel::sunny});
  p.days.push_back({"b", {{11, 0, 3, 0, 0}, {12, 0, 2, 0, 0}}, DayLabel::sunny});
  const auto env = clear_sky_envelope(p);
  EXPECT_EQ(env.t0, 10);
  ASSERT_EQ(env.values.size(), 3u);
  EXPECT_EQ(env.values[0], 5.0);
  EXPECT_EQ(env.values[1], 3.0);
  EXPECT_EQ(env.values[2], 2.0);
}
