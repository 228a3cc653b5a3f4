#pragma once

#include <ostream>
#include <string>

#include "bqn/npmodel.hpp"
#include "bqn/objectives.hpp"
#include "bqn/optimizer.hpp"

// Serialization of traces, problems, and GP snapshots. CSV schemas are
// versioned by a leading comment line; JSON is produced/consumed as strings
// so the vendored JSON library stays out of the public headers.

namespace bqn::trace_io {

inline constexpr const char* kCsvSchemaVersion = "bqn-csv v1";

// Columns: iter,f,grad_norm,step_len,method,event.
void write_trace_csv(std::ostream& os, const optimizer::OptimTrace& t);

std::string trace_to_json(const optimizer::OptimTrace& t);

// Final value, gradient norm, line searches, evaluations, status.
std::string summary_to_json(const optimizer::OptimTrace& t);

std::string gamma_problem_to_json(const objectives::GammaProblem& p);
objectives::GammaProblem gamma_problem_from_json(const std::string& text);

std::string gp_snapshot_to_json(const npmodel::GpState& g);
npmodel::GpState gp_snapshot_from_json(const std::string& text);

}  // namespace bqn::trace_io
