#pragma once

#include <string>

#include "aspo/engine.hpp"

namespace aspo {

// Human-readable account of one epoch, section by section in MAPE-K order:
// telemetry, structured state, agent messages, subset scores, ordering,
// gate checks, audit and outcome.
std::string render_decision_log(const DecisionTrace& t, const TelemetryVector& x,
                                const Catalog& catalog, const ScoringWeights& weights);

}  // namespace aspo
