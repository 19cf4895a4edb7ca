#pragma once

// Batch driver behind the command-line tool: simulate, infer, curves.
//
// simulate writes into the output directory
//   config.txt                 effective configuration
//   manifest.csv               run,group,seed,snr,truth_file,data_file
//   run_NNN_truth.csv          t,N,idx_1,qx_1,qy_1,qz_1,...
//   run_NNN_data.csv           t,s_0,...,s_{S-1}
// infer reads a simulate directory and writes
//   config.txt
//   results_manifest.csv       run,group,seed,truth_file,filter_file,smoother_file,diagnostics_file
//   run_NNN_filter.csv         t,n_hat,k,grid_index,x,y,z,qx,qy,qz (one row per estimated dipole)
//   run_NNN_smoother.csv       same schema
//   run_NNN_diagnostics.csv    t,variant,ess_chosen,ess_forward,ess_backward,log_lf,log_lb,fallback
// curves reads an infer directory and writes curves_group_G.csv with
//   t,mean_filter,bar_filter,count_filter,mean_smoother,bar_smoother,count_smoother,variant_tag_mode

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dipsmc/config.hpp"
#include "dipsmc/estimator.hpp"
#include "dipsmc/model.hpp"
#include "dipsmc/simgen.hpp"
#include "dipsmc/smoother.hpp"

namespace dipsmc {

struct RunEstimates {
  std::vector<PointEstimate> filter;
  std::vector<PointEstimate> smoother;
  std::vector<Variant> tags;
  std::vector<double> log_lf;
  std::vector<double> log_lb;
  std::vector<double> ess_chosen;
  std::vector<double> ess_forward;
  std::vector<double> ess_backward;
  std::vector<bool> fallback;
};

/// Forward filter, backward filter and double smoother on one data set, with
/// point estimates for the filtering and the smoothing distributions.
RunEstimates infer_run(const DipoleModel& model, std::span<const SensorVector> data,
                       const SmootherOptions& options);

SmootherOptions smoother_options(const RunConfig& config, std::size_t run);

void write_truth_csv(const std::filesystem::path& path, const SimulationTruth& truth);
std::vector<DipoleState> read_truth_csv(const std::filesystem::path& path);
void write_data_csv(const std::filesystem::path& path, std::span<const SensorVector> data);
std::vector<SensorVector> read_data_csv(const std::filesystem::path& path);
void write_estimates_csv(const std::filesystem::path& path, std::span<const PointEstimate> estimates,
                         const SourceGrid& grid);
std::vector<PointEstimate> read_estimates_csv(const std::filesystem::path& path);
std::vector<Variant> read_variant_tags(const std::filesystem::path& diagnostics_path);

struct CurveRow {
  CurvePoint filter;
  CurvePoint smoother;
  std::string variant_mode;
};
void write_curve_csv(const std::filesystem::path& path, std::span<const CurveRow> rows);

/// Returns the SNR of every run.
std::vector<double> cmd_simulate(const RunConfig& config, const std::filesystem::path& out);
void cmd_infer(const RunConfig& config, const std::filesystem::path& data_dir,
               const std::filesystem::path& out);
/// Returns the groups for which a curve file was written.
std::vector<int> cmd_curves(const std::filesystem::path& results_dir, const std::filesystem::path& out);

}  // namespace dipsmc
