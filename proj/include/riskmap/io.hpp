#pragma once

#include <map>
#include <string>
#include <vector>

#include "riskmap/diagnostics.hpp"
#include "riskmap/forecast.hpp"
#include "riskmap/mcmc.hpp"
#include "riskmap/summary.hpp"

namespace riskmap {

// One parsed CSV record with the line it came from.
struct CsvRow {
  int line = 0;
  std::vector<std::string> fields;
};

// Minimal RFC 4180 reader: comma separated, optional double quotes, blank
// lines and lines starting with '#' skipped. The first record is the header.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};
CsvTable read_csv(const std::string& path);

// Merge directive: every source id is folded into its target region.
struct MergePlan {
  std::map<std::string, std::string> target_of;       // source id -> target id
  std::map<std::string, std::string> target_name;      // target id -> name
  bool empty() const { return target_of.empty(); }
  // Maps an id through the plan (identity for unmerged ids).
  const std::string& resolve(const std::string& id) const;
};
// CSV with header target_id,target_name,source_id.
MergePlan load_merge(const std::string& path);

// Regions CSV (id,name,population,area_km2,centroid_x,centroid_y) plus an
// edge list (id_a,id_b per line). Pairs are undirected unless the file lists
// some pair in both directions, in which case every pair must appear both
// ways. Merges sum population and area, weight the centroid by area and
// union the neighbours.
RegionTable load_regions(const std::string& regions_path, const std::string& adjacency_path,
                         const MergePlan& merge = {});

enum class CountMode { Cumulative, Daily };
CountMode parse_count_mode(const std::string& text);

struct LoadedCounts {
  CountPanel panel;
  // Negative day-on-day differences set to zero (cumulative mode).
  int clamped = 0;
  std::vector<std::string> warnings;
};

// Long-format CSV date,region_id,value pivoted to the region order of
// `regions`. Cumulative input loses its first day to differencing.
LoadedCounts load_counts(const std::string& path, CountMode mode, const RegionTable& regions,
                         const MergePlan& merge = {});

// Writers emit the formats the loaders read.
void write_regions(const std::string& path, const RegionTable& regions);
void write_adjacency(const std::string& path, const RegionTable& regions);
void write_counts(const std::string& path, const CountPanel& panel, const RegionTable& regions,
                  CountMode mode = CountMode::Daily);

// %.17g so that doubles survive a text round trip.
std::string format_double(double x);

void write_samples(const std::string& path, const PosteriorSamples& samples);
PosteriorSamples read_samples(const std::string& path);

void write_summary(const std::string& path, const std::vector<SummaryRow>& rows);
void write_ledger(const std::string& path, const PosteriorSamples& samples);
void write_calibration(const std::string& path, const CalibrationReport& report,
                       const RegionTable& regions, const CountPanel& panel);
void write_histogram(const std::string& path, const std::vector<double>& heights);
void write_forecast(const std::string& path, const ForecastResult& forecast,
                    const RegionTable& regions);
void write_truth(const std::string& path, const HyperParams& truth);

}  // namespace riskmap
