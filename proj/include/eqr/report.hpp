#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eqr/metrics.hpp"
#include "eqr/solver.hpp"

namespace eqr {

/// Metrics block; infinite PSNR serializes as the string "+inf" (JSON has no
/// infinity literal).
nlohmann::json metrics_json(const MetricReport& m);

/// Convergence summary: converged flag, iterations used, final residual and
/// the NFE counts under both conventions (cached = (K_used+1)*T, naive per
/// naive_f_applications).
nlohmann::json convergence_json(const SolveHistory& h, std::size_t T, int history_m);

/// iteration,residual,picard_fallback,wall_ms,nfe,alpha,row_residuals
/// (alpha and row_residuals are semicolon-joined inside one CSV field).
void write_history_csv(const std::string& path, const SolveHistory& h, std::size_t T);

void write_loss_csv(const std::string& path, const std::vector<double>& losses);

void write_json_file(const std::string& path, const nlohmann::json& doc);

/// Derives sibling output names: "<stem minus extension><suffix>".
std::string sibling_path(const std::string& path, const std::string& suffix);

}  // namespace eqr
