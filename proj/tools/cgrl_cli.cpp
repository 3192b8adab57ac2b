// Command-line front end: ingest, train, infer, report, gradcheck, selftest.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "acceptance/suites.hpp"
#include "cgrl/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::string mapping_method;
  std::string dataset_root;
};

cgrl::PipelineConfig resolve(const Overrides& o) {
  cgrl::PipelineConfig c = o.config_path.empty() ? cgrl::PipelineConfig{} : cgrl::load_config(o.config_path);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (!o.dataset_root.empty()) {
    c.ingest.source = cgrl::DatasetSource::Uah;
    c.ingest.root = o.dataset_root;
  }
  if (o.seed) {
    c.ingest.seed = *o.seed;
    c.ingest.synthetic.seed = *o.seed;
    c.autoencoder.seed = *o.seed;
    c.classifier.seed = *o.seed;
  }
  if (o.tau) c.cgf.tau = *o.tau;
  if (!o.mapping_method.empty()) c.mapping = cgrl::parse_mapping_method(o.mapping_method);
  c.validate();
  return c;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("-o,--output-dir", o.output_dir, "Run directory (overrides the config)");
  cmd->add_option("--seed", o.seed, "Seed applied to every stage");
}

void print_metrics(const char* label, const cgrl::ClassMetrics& m) {
  std::cout << label << ": accuracy=" << m.accuracy << " f1_weighted=" << m.f1_weighted << " f1_macro=" << m.f1_macro
            << '\n';
}

int print_results(const std::vector<suites::CriterionResult>& results) {
  int failed = 0;
  for (const auto& r : results) {
    std::cout << suites::format(r) << '\n';
    if (r.gating && !r.passed) ++failed;
  }
  return failed == 0 ? cgrl::kExitOk : cgrl::kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistent-group time-series classification pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "Parse or generate data, split and normalize");
  add_common(ingest, o);
  ingest->add_option("--dataset-root", o.dataset_root, "UAH-DriveSet root (switches the source to uah)");

  bool baseline_only = false;
  auto* train = app.add_subcommand("train", "Fit the autoencoder, form consistent groups, train classifiers");
  add_common(train, o);
  train->add_flag("--baseline-only", baseline_only, "Skip group formation and train one model");
  train->add_option("--tau", o.tau, "Consistent-group threshold");

  auto* infer = app.add_subcommand("infer", "Group the test set, map groups to models, predict");
  add_common(infer, o);
  infer->add_option("--mapping-method", o.mapping_method, "CR_CR or AVG")
      ->check(CLI::IsMember({"CR_CR", "AVG"}));
  infer->add_option("--tau", o.tau, "Consistent-group threshold for the test side");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Export composition tables, PCA coordinates and Hubert scores");
  report->add_option("run_dir", run_dir, "Completed run directory")->required();

  std::size_t grad_seeds = 5;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the autoencoder gradients");
  gradcheck->add_option("--seeds", grad_seeds, "Number of random networks")->check(CLI::PositiveNumber);

  auto* selftest = app.add_subcommand("selftest", "Run the brute-force oracle suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto s = cgrl::cmd_ingest(resolve(o));
      std::cout << "ingest: train=" << s.train_windows << " test=" << s.test_windows << " t=" << s.timesteps
                << " d=" << s.channels << " classes=" << s.classes << '\n';
    } else if (*train) {
      const auto s = cgrl::cmd_train(resolve(o), baseline_only);
      if (s.baseline_only) {
        std::cout << "train: baseline model only\n";
      } else {
        std::cout << "train: K=" << s.groups << " measure=" << cgrl::to_string(s.measure) << " sizes=";
        for (std::size_t i = 0; i < s.group_sizes.size(); ++i) std::cout << (i ? "," : "") << s.group_sizes[i];
        std::cout << '\n';
      }
    } else if (*infer) {
      const auto s = cgrl::cmd_infer(resolve(o));
      std::cout << "infer: test groups=" << s.test_groups << '\n';
      if (s.grouped_cr_cr) print_metrics("grouped CR_CR", *s.grouped_cr_cr);
      if (s.grouped_avg) print_metrics("grouped AVG", *s.grouped_avg);
      if (s.baseline) print_metrics("baseline", *s.baseline);
      if (!s.grouped && !s.baseline) std::cout << "infer: test labels absent, metrics omitted\n";
    } else if (*report) {
      for (const auto& f : cgrl::cmd_report(run_dir).files) std::cout << "report: wrote " << f.string() << '\n';
    } else if (*gradcheck) {
      return print_results({suites::gradient_correctness(grad_seeds)});
    } else if (*selftest) {
      return print_results(suites::oracle_suites());
    }
  } catch (const cgrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cgrl::kExitConfig;
  } catch (const cgrl::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return cgrl::kExitIo;
  } catch (const cgrl::DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << '\n';
    return cgrl::kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cgrl::kExitFailure;
  }
  return cgrl::kExitOk;
}
