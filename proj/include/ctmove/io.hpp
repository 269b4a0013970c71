#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctmove/diagnostics.hpp"
#include "ctmove/inference.hpp"

namespace ctmove {

inline constexpr const char* kVersion = "0.1.0";

enum class TimeUnit { hours, days };
enum class DistanceUnit { metres, kilometres };

TimeUnit parse_time_unit(const std::string& s);
DistanceUnit parse_distance_unit(const std::string& s);

// Flat "key = value" configuration text ('#' comments). The same format is
// emitted as the run manifest, so a manifest reruns a fit unchanged.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

  std::string get_str(const std::string& key) const;  // throws when missing
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// Delimited text with header `time,x,y`. Times are numeric in the declared
// unit or basic ISO-8601 timestamps; they are rebased to hours since the
// first usable row. Rows with a blank location are skipped (a missing
// observation simply never happened as far as the model is concerned).
ObservationSeries load_observations(const std::string& file, TimeUnit time_unit,
                                    DistanceUnit distance_unit);

// Parsed configuration pieces shared by the commands.
SamplerConfig sampler_config_from(const Config& cfg);
PriorSpec prior_spec_from(const Config& cfg, int n_states);
Parameters parameters_from(const Config& cfg);

// Commands behind the CLI. Each writes its files under out_dir and returns
// the ordinary exit code.
int cmd_simulate(const Config& cfg);
int cmd_fit(const Config& cfg);
int cmd_summarize(const Config& cfg);

// Output/readback helpers (also used by the tests and `summarize`).
void write_path_csv(const std::string& file, const RefinedPath& path);
void write_draws_csv(const std::string& file, const PosteriorSamples& samples);
void write_snapshots_csv(const std::string& file, const PosteriorSamples& samples);

struct DrawTable {
  std::vector<std::string> names;  // parameter columns
  std::vector<std::int64_t> draw_ids;
  std::vector<std::int64_t> iters;
  Eigen::MatrixXd values;
};
DrawTable read_draws_csv(const std::string& file);
std::vector<RefinedPath> read_snapshots_csv(const std::string& file);

}  // namespace ctmove
