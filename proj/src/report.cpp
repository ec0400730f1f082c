#include "eqr/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eqr/errors.hpp"

namespace eqr {

namespace {

std::string joined(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ';';
    os << v[i];
  }
  return os.str();
}

}  // namespace

nlohmann::json metrics_json(const MetricReport& m) {
  nlohmann::json j;
  if (m.has_reference) {
    if (std::isinf(m.psnr))
      j["psnr"] = "+inf";
    else
      j["psnr"] = m.psnr;
    j["ssim"] = m.ssim;
  } else {
    j["psnr"] = nullptr;
    j["ssim"] = nullptr;
  }
  j["consistency"] = m.consistency;
  j["runtime_ms"] = m.runtime_ms;
  j["nfe"] = m.nfe_count;
  return j;
}

nlohmann::json convergence_json(const SolveHistory& h, std::size_t T, int history_m) {
  nlohmann::json j;
  j["converged"] = h.converged;
  j["iterations_used"] = h.iterations_used;
  j["final_residual"] = h.final_residual;
  j["f_evals"] = h.f_evals;
  j["nfe_cached"] = h.f_evals * T;
  j["nfe_naive"] = naive_f_applications(h.iterations_used, history_m) * T;
  return j;
}

void write_history_csv(const std::string& path, const SolveHistory& h, std::size_t T) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "iteration,residual,picard_fallback,wall_ms,nfe,alpha,row_residuals\n";
  out.precision(17);
  for (const IterationRecord& r : h.records) {
    out << r.iteration << ',' << r.residual << ',' << (r.picard_fallback ? 1 : 0) << ','
        << r.wall_ms << ',' << static_cast<std::uint64_t>(r.iteration + 1) * T << ','
        << joined(r.alpha) << ',' << joined(r.row_residuals) << '\n';
  }
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << "step,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  std::size_t dot = path.find_last_of('.');
  std::size_t slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix;
}

}  // namespace eqr
