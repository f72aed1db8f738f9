#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "pvnowcast/pvnowcast.hpp"

namespace testing_support {

using namespace pvnowcast;

/// Site recording [start, end) seconds of a midsummer day.
inline SiteSpec windowed_site(int start, int end) {
  SiteSpec s;
  s.window_start = start;
  s.window_end = end;
  return s;
}

/// Eight one-hour days around noon; cached because many tests share it.
inline const MeasurementPool& small_pool() {
  static const MeasurementPool pool = [] {
    WeatherMix mix{2, 3, 2, 1};
    return simulate_pool(windowed_site(41400, 45000), PvsSpec{}, 8, mix, 11);
  }();
  return pool;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pvnowcast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A pipeline config small enough to run in a few seconds.
inline PipelineConfig tiny_config() {
  PipelineConfig c = case_fixture('b', true);
  c.name = "tiny";
  c.site.window_start = 41400;
  c.site.window_end = 45000;
  c.num_days = 8;
  c.weather_mix = WeatherMix{2, 3, 2, 1};
  c.train_scenarios = 12;
  c.test_scenarios = 3;
  c.train.hidden = 16;
  c.train.batch_size = 4000;
  c.train.epochs = 4;
  return c;
}

/// Sets PVNOWCAST_THREADS for the lifetime of the guard.
class ThreadsEnv {
 public:
  explicit ThreadsEnv(const char* value) {
    if (const char* old = std::getenv("PVNOWCAST_THREADS")) saved_ = old;
    ::setenv("PVNOWCAST_THREADS", value, 1);
  }
  ~ThreadsEnv() {
    if (saved_.empty())
      ::unsetenv("PVNOWCAST_THREADS");
    else
      ::setenv("PVNOWCAST_THREADS", saved_.c_str(), 1);
  }
  ThreadsEnv(const ThreadsEnv&) = delete;
  ThreadsEnv& operator=(const ThreadsEnv&) = delete;

 private:
  std::string saved_;
};

}  // namespace testing_support
