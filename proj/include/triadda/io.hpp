#pragma once

#include <string>

#include "triadda/observation.hpp"
#include "triadda/series.hpp"

namespace triadda {

// All CSV files are comma separated with a one-line header; floats carry 17
// significant digits so files round-trip bit-exactly.

std::string format_double(double v);

void write_stat_series_csv(const std::string& path, const StatSeries& series);
StatSeries read_stat_series_csv(const std::string& path);

void write_snapshot_csv(const std::string& path, const RowMatrixXd& samples);
RowMatrixXd read_snapshot_csv(const std::string& path);

void write_observations_csv(const std::string& path, const ObservationSeries& obs);
ObservationSeries read_observations_csv(const std::string& path);

}  // namespace triadda
