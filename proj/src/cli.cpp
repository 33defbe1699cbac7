#include "dynbn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dynbn/errors.hpp"
#include "dynbn/filter.hpp"
#include "dynbn/logging.hpp"
#include "dynbn/oracle.hpp"
#include "dynbn/scenario_io.hpp"
#include "dynbn/templates.hpp"
#include "dynbn/verify.hpp"

namespace dynbn::cli {

namespace {

using io::format_double;

std::string component_label(const std::string& id, int dim, int k) {
  if (dim == 1) return id;
  return id + "[" + std::to_string(k) + "]";
}

void write_trajectory(const filter::Trajectory& traj, std::ostream& out) {
  out << "step,clique_id,variable,mean,variance\n";
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const auto& tb = traj.steps[s].posterior;
    for (std::size_t c = 0; c < tb.beliefs.size(); ++c) {
      const auto& belief = tb.beliefs[c];
      int offset = 0;
      for (std::size_t m = 0; m < belief.clique.members.size(); ++m) {
        for (int k = 0; k < belief.dims[m]; ++k) {
          out << (s + 1) << "," << c << ","
              << component_label(belief.clique.members[m], belief.dims[m], k) << ","
              << format_double(belief.mean[offset]) << ","
              << format_double(belief.cov(offset, offset)) << "\n";
          ++offset;
        }
      }
    }
  }
}

void write_covariances(const filter::Trajectory& traj, std::ostream& out) {
  out << "step,clique,row_var,col_var,value\n";
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    const auto& tb = traj.steps[s].posterior;
    for (std::size_t c = 0; c < tb.beliefs.size(); ++c) {
      const auto& belief = tb.beliefs[c];
      std::vector<std::string> labels;
      for (std::size_t m = 0; m < belief.clique.members.size(); ++m)
        for (int k = 0; k < belief.dims[m]; ++k)
          labels.push_back(component_label(belief.clique.members[m], belief.dims[m], k));
      for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
          out << (s + 1) << "," << c << "," << labels[i] << "," << labels[j] << ","
              << format_double(belief.cov(i, j)) << "\n";
    }
  }
}

void write_diagnostics(const filter::Trajectory& traj, std::ostream& out) {
  out << "step,obs_index,family,m_prior,w2_prior,y,m_post,w2_post,dH_lambda,"
         "dV_lower,dV_upper,eps1,eps2,tau,bound,bound_applicable\n";
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    for (std::size_t i = 0; i < traj.steps[s].observations.size(); ++i) {
      const auto& rec = traj.steps[s].observations[i];
      out << (s + 1) << "," << (i + 1) << "," << dglm::family_name(rec.family) << ",";
      if (rec.skipped) {
        out << ",,," << format_double(rec.y) << ",,,,,,,,,0\n";
        continue;
      }
      out << format_double(rec.prior.m) << "," << format_double(rec.prior.w2) << ","
          << format_double(rec.y) << "," << format_double(rec.posterior.m) << ","
          << format_double(rec.posterior.w2) << ",";
      if (rec.diagnostics) {
        const auto& d = *rec.diagnostics;
        out << format_double(d.dH_lambda) << "," << format_double(d.dV_lower) << ","
            << format_double(d.dV_upper) << ",";
        if (d.error_bound) {
          const auto& b = *d.error_bound;
          out << format_double(b.eps1) << "," << format_double(b.eps2) << ","
              << format_double(b.tau) << ","
              << (b.bound_applicable ? format_double(b.bound) : std::string()) << ","
              << (b.bound_applicable ? 1 : 0) << "\n";
        } else {
          out << ",,,,0\n";
        }
      } else {
        out << ",,,,,,0\n";
      }
    }
  }
}

// Cross-check: replay each step against dense conditioning with the
// pseudo-Gaussian observations implied by the recorded lambda posteriors.
// Returns the worst absolute deviation, or a negative value when a step had
// to be skipped (an observation that widened its lambda belief has no
// Gaussian-likelihood equivalent).
double replay_against_dense(const filter::Scenario& scenario, const filter::Trajectory& traj) {
  double worst = 0.0;
  bool all_checked = true;
  std::optional<filter::FrontierPrior> carried;

  for (std::size_t s = 0; s < scenario.steps.size(); ++s) {
    const auto& step = scenario.steps[s];
    std::vector<std::string> order;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    filter::compose_joint(step, carried, &order, &mean, &cov);

    std::map<std::string, int> offset;
    std::map<std::string, int> dims;
    int total = 0;
    for (const auto& v : step.dag.variables) dims[v.id] = v.dim;
    for (const auto& id : order) {
      offset[id] = total;
      total += dims.at(id);
    }

    std::vector<Eigen::VectorXd> rows;
    std::vector<double> values, variances;
    bool checkable = true;
    for (std::size_t i = 0; i < step.observations.size(); ++i) {
      const auto& rec = traj.steps[s].observations[i];
      if (rec.skipped) continue;
      const double r = 1.0 / rec.posterior.w2 - 1.0 / rec.prior.w2;
      if (!(r > 0.0)) {
        checkable = false;
        break;
      }
      Eigen::VectorXd row = Eigen::VectorXd::Zero(total);
      for (const auto& [var, coeffs] : step.observations[i].design)
        row.segment(offset.at(var), coeffs.size()) = coeffs;
      rows.push_back(std::move(row));
      values.push_back((rec.posterior.m / rec.posterior.w2 - rec.prior.m / rec.prior.w2) / r);
      variances.push_back(1.0 / r);
    }

    if (checkable) {
      const auto [dense_mean, dense_cov] =
          oracle::dense_condition(mean, cov, rows, values, variances);
      for (const auto& belief : traj.steps[s].posterior.beliefs) {
        std::vector<int> sel;
        for (const auto& id : belief.clique.members)
          for (int k = 0; k < dims.at(id); ++k) sel.push_back(offset.at(id) + k);
        for (std::size_t i = 0; i < sel.size(); ++i) {
          worst = std::max(worst, std::abs(belief.mean[i] - dense_mean[sel[i]]));
          for (std::size_t j = 0; j < sel.size(); ++j)
            worst = std::max(worst, std::abs(belief.cov(i, j) - dense_cov(sel[i], sel[j])));
        }
      }
    } else {
      log::warn("oracle check skipped for step " + std::to_string(s + 1) +
                " (an observation widened its lambda belief)");
      all_checked = false;
    }

    if (s + 1 < scenario.steps.size()) {
      // Carry the tree filter's own frontier so each step is checked in
      // isolation against its dense counterpart.
      const auto& posterior = traj.steps[s].posterior;
      std::vector<std::string> sorted = step.frontier;
      std::sort(sorted.begin(), sorted.end());
      const int clique = posterior.tree.containing_clique(sorted);
      filter::FrontierPrior next;
      next.variables = step.frontier;
      std::tie(next.mean, next.cov) = posterior.beliefs[clique].marginal(step.frontier);
      carried = std::move(next);
    }
  }
  return all_checked ? worst : -worst;
}

}  // namespace

int cmd_run(const RunConfig& config) {
  try {
    if (config.grid_cap < (1 << 10))
      throw ScenarioError("grid cap must be at least 1024 points");
    const filter::Scenario scenario = io::load_scenario(config.scenario_path);

    filter::RunOptions options;
    options.diagnostics = config.diagnostics;
    options.grid_cap = config.grid_cap;
    options.error_policy = config.error_policy == RunConfig::Policy::Abort
                               ? filter::ErrorPolicy::Abort
                               : filter::ErrorPolicy::SkipAndFlag;
    const filter::Trajectory traj = filter::run(scenario, options);

    if (config.oracle_check) {
      const double dev = replay_against_dense(scenario, traj);
      log::info("oracle check max deviation: " + io::format_double(std::abs(dev)));
      if (std::abs(dev) > 1e-6) {
        std::cerr << "oracle check failed: tree propagation deviates from dense "
                     "conditioning by "
                  << io::format_double(std::abs(dev)) << "\n";
        return 3;
      }
    }

    std::filesystem::create_directories(config.out_dir);
    {
      std::ofstream out(config.out_dir + "/trajectory.csv");
      if (!out) throw ScenarioError("cannot write to output directory '" + config.out_dir + "'");
      write_trajectory(traj, out);
    }
    {
      std::ofstream out(config.out_dir + "/covariances.csv");
      write_covariances(traj, out);
    }
    if (config.diagnostics) {
      std::ofstream out(config.out_dir + "/diagnostics.csv");
      write_diagnostics(traj, out);
    }
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const ModelMismatchError& e) {
    std::cerr << "model mismatch: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& suite) {
  return verify::run_suite(suite, std::cout);
}

int cmd_scenario_gen(const std::string& template_name, std::uint64_t seed,
                     const std::string& path) {
  try {
    const filter::Scenario scenario = templates::by_name(template_name, seed);
    io::save_scenario(scenario, path);
    return 0;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario-gen error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dynbn::cli
