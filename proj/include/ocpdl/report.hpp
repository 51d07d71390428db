#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ocpdl/online.hpp"

namespace ocpdl {

// One method run: the trace of a single trial.
struct RunCurve {
  std::string method;
  std::int64_t trial = 0;
  std::vector<TraceRecord> trace;
};

// CSV with header method,trial,iter,wall_seconds,abs_error,rel_error.
// wall_seconds accumulates the per-record durations within each curve; error
// fields are empty when the run had no reference tensor. All numbers use
// %.17g, so output is reproducible byte for byte from equal traces.
std::string trace_csv(const std::vector<RunCurve>& curves);
void write_trace_csv(const std::vector<RunCurve>& curves, const std::filesystem::path& path);

// Static chart of error (rel_error when present, surrogate otherwise) against
// iteration: one <polyline> per trial, one mean <path> per method, and a
// +-1 standard deviation <polygon> band per method.
std::string error_chart_svg(const std::vector<RunCurve>& curves);
void write_error_chart(const std::vector<RunCurve>& curves, const std::filesystem::path& path);

}  // namespace ocpdl
